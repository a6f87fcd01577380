//! Conversion of external datasets into the engine's canonical tables.

mod ascii_grid;
mod geojson;
pub mod synth;
pub mod tables;

pub use ascii_grid::{read_ascii_grid, write_ascii_grid};
pub use geojson::{parse_boundary_geojson, parse_polygon_string};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_length, midpoint, GeoPoint};
use crate::raster::{center_of, CellRecord, GridSpec};

/// One row of a point table: a location carrying a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub location: GeoPoint,
    pub value: f64,
}

impl PointRecord {
    pub fn new(location: GeoPoint, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Format(format!("non-finite point value {value}")));
        }
        Ok(Self { location, value })
    }
}

/// A road segment between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub way_id: String,
    pub start: GeoPoint,
    pub end: GeoPoint,
}

impl EdgeRecord {
    pub fn new(way_id: impl Into<String>, start: GeoPoint, end: GeoPoint) -> Result<Self> {
        let way_id = way_id.into();
        if start == end {
            return Err(Error::Format(format!("edge of way `{way_id}` has identical endpoints")));
        }
        Ok(Self { way_id, start, end })
    }
}

/// Per-city attributes that do not come from the spatial aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityMeta {
    pub id: String,
    pub name: String,
    pub country: Option<String>,
    pub population: Option<f64>,
    pub gdp_per_capita: Option<f64>,
}

/// Drops zero-valued cells, keeping order.
pub fn sparsify(cells: &[CellRecord]) -> Vec<CellRecord> {
    cells.iter().filter(|c| c.value != 0.0).copied().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeConversion {
    pub points: Vec<PointRecord>,
    /// Edges dropped because they cross the antimeridian.
    pub skipped: usize,
}

/// Turns each edge into a point at its midpoint weighted by its length in
/// meters.
pub fn edges_to_points(edges: &[EdgeRecord]) -> EdgeConversion {
    let mut out = EdgeConversion {
        points: Vec::with_capacity(edges.len()),
        skipped: 0,
    };
    for e in edges {
        match midpoint(e.start, e.end) {
            Ok(location) => out.points.push(PointRecord {
                location,
                value: haversine_length(e.start, e.end),
            }),
            Err(_) => out.skipped += 1,
        }
    }
    out
}

/// Places each cell's value at the cell center, so raster data can be fed
/// through the vector path.
pub fn cells_to_points(cells: &[CellRecord], spec: &GridSpec) -> Result<Vec<PointRecord>> {
    cells
        .iter()
        .map(|c| {
            Ok(PointRecord {
                location: center_of(c.cell, spec)?,
                value: c.value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{cell_of, CellIndex};
    use approx::assert_abs_diff_eq;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn rec(row: usize, col: usize, value: f64) -> CellRecord {
        CellRecord {
            cell: CellIndex::new(row, col),
            value,
        }
    }

    #[test]
    fn sparsify_examples() {
        assert_eq!(sparsify(&[rec(0, 0, 0.0), rec(0, 1, 5.0)]), vec![rec(0, 1, 5.0)]);
        assert!(sparsify(&[rec(0, 0, 0.0), rec(3, 3, 0.0)]).is_empty());
        let dense = vec![rec(0, 0, 1.0), rec(0, 1, -2.0), rec(1, 0, 3.5)];
        assert_eq!(sparsify(&dense), dense);
    }

    #[test]
    fn edge_midpoints_and_lengths() {
        let edges = vec![
            EdgeRecord::new("w1", pt(0.0, 0.0), pt(0.0, 1.0)).unwrap(),
            EdgeRecord::new("w2", pt(0.0, 179.9), pt(0.0, -179.9)).unwrap(),
        ];
        let conv = edges_to_points(&edges);
        assert_eq!(conv.skipped, 1);
        assert_eq!(conv.points.len(), 1);
        assert_eq!(conv.points[0].location, pt(0.0, 0.5));
        assert_abs_diff_eq!(conv.points[0].value, 111_194.93, epsilon = 0.01);
        assert_eq!(conv.points.len() + conv.skipped, edges.len());

        let empty = edges_to_points(&[]);
        assert!(empty.points.is_empty());
        assert_eq!(empty.skipped, 0);

        assert!(EdgeRecord::new("w3", pt(1.0, 1.0), pt(1.0, 1.0)).is_err());
    }

    #[test]
    fn cell_centers_as_points() {
        let spec = GridSpec::new(2.0, 0.0, 1.0, 2, 2).unwrap();
        let pts = cells_to_points(&[rec(0, 0, 7.0)], &spec).unwrap();
        assert_eq!(
            pts,
            vec![PointRecord {
                location: pt(1.5, 0.5),
                value: 7.0
            }]
        );
        assert!(cells_to_points(&[], &spec).unwrap().is_empty());
        assert!(cells_to_points(&[rec(2, 0, 1.0)], &spec).is_err());

        let all: Vec<_> = (0..2).flat_map(|r| (0..2).map(move |c| rec(r, c, 1.0))).collect();
        for (p, c) in cells_to_points(&all, &spec).unwrap().iter().zip(&all) {
            assert_eq!(cell_of(p.location, &spec).unwrap(), c.cell);
        }
    }
}
