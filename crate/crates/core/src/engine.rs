//! Per-polygon aggregation over point and cell tables.
//!
//! Both query paths run through [`run_partitioned`]: the input table is cut
//! into contiguous shards, each shard is mapped to a dense vector of partial
//! aggregates (one slot per city) by whichever worker picks it up, and the
//! coordinator merges partials in ascending shard order. For a fixed shard
//! count the floating-point result is therefore independent of the worker
//! count.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{point_in_boundary, BBox, PolygonBoundary};
use crate::ingest::PointRecord;
use crate::raster::{rasterize_boundary, CellIndex, CellRecord, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Vector,
    Raster,
}

impl std::fmt::Display for QueryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QueryMode::Vector => "vector",
            QueryMode::Raster => "raster",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Sum,
    Count,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryPlan {
    pub mode: QueryMode,
    pub aggregate: AggregateKind,
    pub partitions: usize,
    pub workers: usize,
    /// Skip containment tests for points outside a boundary's bbox. Only
    /// affects the vector path and never changes results.
    pub bbox_prefilter: bool,
}

impl QueryPlan {
    pub fn new(mode: QueryMode, partitions: usize, workers: usize) -> Self {
        Self {
            mode,
            aggregate: AggregateKind::Sum,
            partitions,
            workers,
            bbox_prefilter: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::InvalidPlan("partitions must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidPlan("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A mergeable (sum, count) partial aggregate for one city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityAggregate {
    pub city_id: String,
    pub sum: f64,
    pub count: u64,
}

impl CityAggregate {
    pub fn empty(city_id: impl Into<String>) -> Self {
        Self {
            city_id: city_id.into(),
            sum: 0.0,
            count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn value(&self, kind: AggregateKind) -> Option<f64> {
        match kind {
            AggregateKind::Sum => Some(self.sum),
            AggregateKind::Count => Some(self.count as f64),
            AggregateKind::Mean => self.mean(),
        }
    }
}

pub fn merge_aggregates(a: &CityAggregate, b: &CityAggregate) -> Result<CityAggregate> {
    if a.city_id != b.city_id {
        return Err(Error::CityIdMismatch(a.city_id.clone(), b.city_id.clone()));
    }
    Ok(CityAggregate {
        city_id: a.city_id.clone(),
        sum: a.sum + b.sum,
        count: a.count + b.count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecStats {
    pub wall_seconds: f64,
    /// Time workers spent mapping shards plus the serial setup and merge
    /// time on the calling thread.
    pub busy_core_seconds: f64,
    pub rows_scanned: u64,
    /// Rows that fell in at least one city.
    pub rows_matched: u64,
    pub partitions: usize,
    pub workers: usize,
    pub mode: QueryMode,
    #[serde(skip)]
    pub slowest_partition_seconds: f64,
    /// Exact containment (or join probe) evaluations performed.
    #[serde(skip)]
    pub containment_tests: u64,
}

impl ExecStats {
    pub fn core_minutes(&self) -> f64 {
        self.busy_core_seconds / 60.0
    }
}

/// Per-shard partial aggregates, one slot per city.
#[derive(Debug, Clone)]
pub struct ShardPartial {
    pub sums: Vec<CompensatedSum>,
    pub counts: Vec<u64>,
    pub rows_matched: u64,
    pub containment_tests: u64,
}

impl ShardPartial {
    fn new(n_cities: usize) -> Self {
        Self {
            sums: vec![CompensatedSum::default(); n_cities],
            counts: vec![0; n_cities],
            rows_matched: 0,
            containment_tests: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, city: usize, value: f64) {
        self.sums[city].add(value);
        self.counts[city] += 1;
    }
}

/// Maps one shard of an input table to per-city partial aggregates.
pub trait ShardMapper<T>: Sync {
    fn n_cities(&self) -> usize;
    fn map_shard(&self, shard: &[T], partial: &mut ShardPartial);
}

/// Merged per-city totals, indexed like the mapper's cities.
#[derive(Debug, Clone)]
pub struct PartitionedResult {
    pub sums: Vec<f64>,
    pub counts: Vec<u64>,
    pub stats: ExecStats,
}

fn shard_bounds(len: usize, partitions: usize, k: usize) -> (usize, usize) {
    (k * len / partitions, (k + 1) * len / partitions)
}

/// Splits `table` into `plan.partitions` contiguous shards, maps them on at
/// most `plan.workers` threads and merges partials in ascending shard order.
pub fn run_partitioned<T: Sync, M: ShardMapper<T>>(
    table: &[T],
    mapper: &M,
    plan: &QueryPlan,
) -> Result<PartitionedResult> {
    plan.validate()?;
    let start = Instant::now();
    let n_cities = mapper.n_cities();
    let next = AtomicUsize::new(0);
    let threads = plan.workers.min(plan.partitions);

    let work = || {
        let mut done = Vec::new();
        loop {
            let k = next.fetch_add(1, Ordering::Relaxed);
            if k >= plan.partitions {
                break;
            }
            let t0 = Instant::now();
            let (lo, hi) = shard_bounds(table.len(), plan.partitions, k);
            let mut partial = ShardPartial::new(n_cities);
            mapper.map_shard(&table[lo..hi], &mut partial);
            done.push((k, partial, t0.elapsed().as_secs_f64()));
        }
        done
    };

    let mut shards: Vec<(usize, ShardPartial, f64)> = if threads == 1 {
        work()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads).map(|_| s.spawn(work)).collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("shard worker panicked"))
                .collect()
        })
    };
    let merge_start = Instant::now();
    shards.sort_by_key(|(k, _, _)| *k);

    let mut sums = vec![CompensatedSum::default(); n_cities];
    let mut counts = vec![0u64; n_cities];
    let mut busy = 0.0;
    let mut slowest = 0.0f64;
    let mut matched = 0;
    let mut tests = 0;
    for (_, partial, secs) in &shards {
        for (acc, s) in sums.iter_mut().zip(&partial.sums) {
            acc.add(s.value());
        }
        for (acc, c) in counts.iter_mut().zip(&partial.counts) {
            *acc += c;
        }
        busy += secs;
        slowest = slowest.max(*secs);
        matched += partial.rows_matched;
        tests += partial.containment_tests;
    }
    busy += merge_start.elapsed().as_secs_f64();

    Ok(PartitionedResult {
        sums: sums.iter().map(CompensatedSum::value).collect(),
        counts,
        stats: ExecStats {
            wall_seconds: start.elapsed().as_secs_f64(),
            busy_core_seconds: busy,
            rows_scanned: table.len() as u64,
            rows_matched: matched,
            partitions: plan.partitions,
            workers: plan.workers,
            mode: plan.mode,
            slowest_partition_seconds: slowest,
            containment_tests: tests,
        },
    })
}

#[derive(Debug, Clone)]
pub struct QueryOutput {
    /// One entry per city, in catalog order. Cities with no rows are present
    /// with zero sum and count.
    pub aggregates: Vec<CityAggregate>,
    pub stats: ExecStats,
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateCityId(id.to_string()));
        }
    }
    Ok(())
}

fn finish<'a>(ids: impl Iterator<Item = &'a str>, result: PartitionedResult) -> QueryOutput {
    let aggregates = ids
        .zip(result.sums.iter().zip(&result.counts))
        .map(|(id, (&sum, &count))| CityAggregate {
            city_id: id.to_string(),
            sum: if count == 0 { 0.0 } else { sum },
            count,
        })
        .collect();
    QueryOutput {
        aggregates,
        stats: result.stats,
    }
}

/// Vector path mapper: bbox prefilter, then even-odd containment.
pub struct VectorMapper<'a> {
    boundaries: &'a [PolygonBoundary],
    bboxes: Vec<BBox>,
    prefilter: bool,
}

impl<'a> VectorMapper<'a> {
    pub fn new(boundaries: &'a [PolygonBoundary], prefilter: bool) -> Self {
        Self {
            boundaries,
            bboxes: boundaries.iter().map(PolygonBoundary::bbox).collect(),
            prefilter,
        }
    }
}

impl ShardMapper<PointRecord> for VectorMapper<'_> {
    fn n_cities(&self) -> usize {
        self.boundaries.len()
    }

    fn map_shard(&self, shard: &[PointRecord], partial: &mut ShardPartial) {
        for p in shard {
            let mut hit = false;
            for (i, (b, bb)) in self.boundaries.iter().zip(&self.bboxes).enumerate() {
                if self.prefilter && !bb.contains(p.location) {
                    continue;
                }
                partial.containment_tests += 1;
                if point_in_boundary(p.location, b) {
                    partial.add(i, p.value);
                    hit = true;
                }
            }
            partial.rows_matched += u64::from(hit);
        }
    }
}

/// Adds the serial time spent outside `run_partitioned` (building and
/// freeing the index) to both wall and busy time.
fn charge_setup(stats: &mut ExecStats, setup: Instant) {
    let serial = (setup.elapsed().as_secs_f64() - stats.wall_seconds).max(0.0);
    stats.wall_seconds += serial;
    stats.busy_core_seconds += serial;
}

pub fn vector_polygon_query(
    points: &[PointRecord],
    boundaries: &[PolygonBoundary],
    plan: &QueryPlan,
) -> Result<QueryOutput> {
    if plan.mode != QueryMode::Vector {
        return Err(Error::InvalidPlan("vector query requires mode=vector".into()));
    }
    let setup = Instant::now();
    check_unique(boundaries.iter().map(|b| b.id.as_str()))?;
    let mapper = VectorMapper::new(boundaries, plan.bbox_prefilter);
    let mut result = run_partitioned(points, &mapper, plan)?;
    drop(mapper);
    charge_setup(&mut result.stats, setup);
    Ok(finish(boundaries.iter().map(|b| b.id.as_str()), result))
}

/// A sparse cell table together with the grid it indexes.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub spec: GridSpec,
    pub records: Vec<CellRecord>,
}

/// Per-city cell-index sets on one grid: the raster form of a boundary
/// catalog.
#[derive(Debug, Clone)]
pub struct RasterizedBoundaries {
    pub spec: GridSpec,
    pub cities: Vec<(String, Vec<CellIndex>)>,
}

impl RasterizedBoundaries {
    pub fn from_boundaries(boundaries: &[PolygonBoundary], spec: &GridSpec) -> Self {
        Self {
            spec: *spec,
            cities: boundaries
                .iter()
                .map(|b| (b.id.clone(), rasterize_boundary(b, spec)))
                .collect(),
        }
    }
}

/// Raster path mapper: hash equi-join on (row, col), built from the city
/// sets and probed with the cell table.
pub struct RasterMapper {
    n_cities: usize,
    index: HashMap<CellIndex, Vec<u32>>,
}

impl RasterMapper {
    pub fn new(sets: &RasterizedBoundaries) -> Self {
        let mut index: HashMap<CellIndex, Vec<u32>> = HashMap::new();
        for (i, (_, cells)) in sets.cities.iter().enumerate() {
            for c in cells {
                let owners = index.entry(*c).or_default();
                if owners.last() != Some(&(i as u32)) {
                    owners.push(i as u32);
                }
            }
        }
        Self {
            n_cities: sets.cities.len(),
            index,
        }
    }
}

impl ShardMapper<CellRecord> for RasterMapper {
    fn n_cities(&self) -> usize {
        self.n_cities
    }

    fn map_shard(&self, shard: &[CellRecord], partial: &mut ShardPartial) {
        partial.containment_tests += shard.len() as u64;
        for c in shard {
            if let Some(owners) = self.index.get(&c.cell) {
                for &city in owners {
                    partial.add(city as usize, c.value);
                }
                partial.rows_matched += 1;
            }
        }
    }
}

pub fn raster_polygon_query(
    cells: &CellTable,
    rasterized: &RasterizedBoundaries,
    plan: &QueryPlan,
) -> Result<QueryOutput> {
    if plan.mode != QueryMode::Raster {
        return Err(Error::InvalidPlan("raster query requires mode=raster".into()));
    }
    if !cells.spec.same_lattice(&rasterized.spec) {
        return Err(Error::GridSpecMismatch);
    }
    let setup = Instant::now();
    check_unique(rasterized.cities.iter().map(|(id, _)| id.as_str()))?;
    let mapper = RasterMapper::new(rasterized);
    let mut result = run_partitioned(&cells.records, &mapper, plan)?;
    drop(mapper);
    charge_setup(&mut result.stats, setup);
    Ok(finish(rasterized.cities.iter().map(|(id, _)| id.as_str()), result))
}

const AGGREGATE_HEADER: [&str; 5] = ["city_id", "sum", "count", "mean", "empty_flag"];

/// Writes `city_id,sum,count,mean,empty_flag`; empty cities get a blank mean
/// and flag 1.
pub fn write_aggregates_csv<W: Write>(w: W, aggregates: &[CityAggregate]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(AGGREGATE_HEADER)?;
    for a in aggregates {
        wtr.write_record([
            a.city_id.clone(),
            a.sum.to_string(),
            a.count.to_string(),
            a.mean().map(|m| m.to_string()).unwrap_or_default(),
            u8::from(a.is_empty()).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_aggregates_csv<R: Read>(r: R) -> Result<Vec<CityAggregate>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != AGGREGATE_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", AGGREGATE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| Error::Parse { line, message: m };
        let sum: f64 = record[1]
            .parse()
            .map_err(|_| err(format!("bad sum `{}`", &record[1])))?;
        let count: u64 = record[2]
            .parse()
            .map_err(|_| err(format!("bad count `{}`", &record[2])))?;
        out.push(CityAggregate {
            city_id: record[0].to_string(),
            sum,
            count,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct StatsJson<'a> {
    wall_seconds: f64,
    busy_core_seconds: f64,
    rows_scanned: u64,
    rows_matched: u64,
    partitions: usize,
    workers: usize,
    mode: &'a QueryMode,
}

pub fn write_stats_json<W: Write>(mut w: W, stats: &ExecStats) -> Result<()> {
    let j = StatsJson {
        wall_seconds: stats.wall_seconds,
        busy_core_seconds: stats.busy_core_seconds,
        rows_scanned: stats.rows_scanned,
        rows_matched: stats.rows_matched,
        partitions: stats.partitions,
        workers: stats.workers,
        mode: &stats.mode,
    };
    serde_json::to_writer_pretty(&mut w, &j)?;
    w.write_all(b"\n")?;
    Ok(())
}
