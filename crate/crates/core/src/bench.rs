//! Vector vs raster timing on one shared workload.
//!
//! The workload is a dense value grid; the vector path sees every cell as a
//! point at its center and the raster path sees the cell table itself, so both
//! paths answer the same question. City masks for the raster path are built
//! once up front, like a pre-rasterized polygon table, and are not timed.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    raster_polygon_query, vector_polygon_query, CellTable, QueryMode, QueryOutput, QueryPlan, RasterizedBoundaries,
};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, PolygonBoundary, Ring};
use crate::ingest::{cells_to_points, PointRecord};
use crate::raster::{CellIndex, CellRecord, GridSpec};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    /// The grid is `grid_side x grid_side` cells; every cell is one point.
    pub grid_side: usize,
    pub boundaries: usize,
    pub vertices: usize,
    pub repetitions: usize,
    pub workers: usize,
    pub partitions: usize,
    pub seed: u64,
}

impl Default for BenchScenario {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            grid_side: 1000,
            boundaries: 200,
            vertices: 128,
            repetitions: 5,
            workers,
            partitions: 4 * workers,
            seed: 42,
        }
    }
}

pub struct BenchWorkload {
    pub spec: GridSpec,
    pub cells: CellTable,
    pub points: Vec<PointRecord>,
    pub boundaries: Vec<PolygonBoundary>,
    pub rasterized: RasterizedBoundaries,
}

const CELL_SIZE: f64 = 0.01;

/// Builds the grid, its point view and `boundaries` random star-shaped
/// polygons with `vertices` vertices each.
pub fn build_workload(s: &BenchScenario) -> Result<BenchWorkload> {
    if s.grid_side == 0 || s.boundaries == 0 || s.vertices < 3 || s.repetitions == 0 {
        return Err(Error::InvalidConfig(
            "grid_side, boundaries and repetitions must be positive and vertices at least 3".into(),
        ));
    }
    let extent = s.grid_side as f64 * CELL_SIZE;
    let spec = GridSpec::new(extent.min(80.0), 0.0, CELL_SIZE, s.grid_side, s.grid_side)?;

    let mut values = stream(s.seed, "bench-values");
    let records: Vec<CellRecord> = (0..s.grid_side)
        .flat_map(|row| (0..s.grid_side).map(move |col| CellIndex::new(row, col)))
        .map(|cell| CellRecord {
            cell,
            value: values.random_range(1.0..100.0),
        })
        .collect();
    let points = cells_to_points(&records, &spec)?;

    let mut shapes = stream(s.seed, "bench-shapes");
    let max_radius = (extent * 0.06).max(2.0 * CELL_SIZE);
    let mut boundaries = Vec::with_capacity(s.boundaries);
    for i in 0..s.boundaries {
        let radius = shapes.random_range(0.3 * max_radius..max_radius);
        let clat = shapes.random_range(spec.bottom_lat() + radius..spec.top_lat - radius);
        let clon = shapes.random_range(spec.left_lon + radius..spec.right_lon() - radius);
        let phase = shapes.random_range(0.0..TAU);
        let vertices = (0..s.vertices)
            .map(|k| {
                let angle = phase + TAU * k as f64 / s.vertices as f64;
                let r = radius * shapes.random_range(0.6..1.0);
                GeoPoint::new(clat + r * angle.sin(), clon + r * angle.cos())
            })
            .collect::<Result<Vec<_>>>()?;
        boundaries.push(PolygonBoundary::new(
            format!("b{i:04}"),
            format!("Boundary {i}"),
            None,
            vec![Ring::new(vertices)?],
        )?);
    }
    let rasterized = RasterizedBoundaries::from_boundaries(&boundaries, &spec);
    Ok(BenchWorkload {
        spec,
        cells: CellTable { spec, records },
        points,
        boundaries,
        rasterized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: QueryMode,
    /// `None` for the median row.
    pub repetition: Option<usize>,
    pub wall_seconds: f64,
    pub busy_core_seconds: f64,
    pub core_minutes: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub scenario: BenchScenario,
    pub points: usize,
    pub cells: usize,
    pub rows: Vec<BenchRow>,
    pub vector_median: BenchRow,
    pub raster_median: BenchRow,
    /// Whether both paths produced identical per-city counts.
    pub counts_agree: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_row(mode: QueryMode, rows: &[BenchRow]) -> BenchRow {
    let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == mode).collect();
    let busy = median(mine.iter().map(|r| r.busy_core_seconds).collect());
    BenchRow {
        mode,
        repetition: None,
        wall_seconds: median(mine.iter().map(|r| r.wall_seconds).collect()),
        busy_core_seconds: busy,
        core_minutes: busy / 60.0,
    }
}

pub fn run_bench(s: &BenchScenario) -> Result<BenchReport> {
    let w = build_workload(s)?;
    let vplan = QueryPlan::new(QueryMode::Vector, s.partitions, s.workers);
    let rplan = QueryPlan::new(QueryMode::Raster, s.partitions, s.workers);

    let mut rows = Vec::with_capacity(2 * s.repetitions);
    let mut last: Option<(QueryOutput, QueryOutput)> = None;
    for rep in 0..s.repetitions {
        let t = Instant::now();
        let v = vector_polygon_query(&w.points, &w.boundaries, &vplan)?;
        let v_wall = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let r = raster_polygon_query(&w.cells, &w.rasterized, &rplan)?;
        let r_wall = t.elapsed().as_secs_f64();
        for (mode, out, wall) in [(QueryMode::Vector, &v, v_wall), (QueryMode::Raster, &r, r_wall)] {
            rows.push(BenchRow {
                mode,
                repetition: Some(rep),
                wall_seconds: wall,
                busy_core_seconds: out.stats.busy_core_seconds,
                core_minutes: out.stats.core_minutes(),
            });
        }
        last = Some((v, r));
    }
    let counts_agree = last.is_some_and(|(v, r)| {
        v.aggregates
            .iter()
            .zip(&r.aggregates)
            .all(|(a, b)| a.city_id == b.city_id && a.count == b.count)
    });

    Ok(BenchReport {
        scenario: s.clone(),
        points: w.points.len(),
        cells: w.cells.records.len(),
        vector_median: median_row(QueryMode::Vector, &rows),
        raster_median: median_row(QueryMode::Raster, &rows),
        rows,
        counts_agree,
    })
}
