//! Raster grids: metadata, cell addressing and boundary rasterization.
//!
//! Row 0 is the northernmost row. A cell is represented by its center point
//! both when placing data and when deciding polygon membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{point_in_boundary, GeoPoint, PolygonBoundary};

const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub top_lat: f64,
    pub left_lon: f64,
    pub cell_size: f64,
    pub nrows: usize,
    pub ncols: usize,
}

impl GridSpec {
    pub fn new(top_lat: f64, left_lon: f64, cell_size: f64, nrows: usize, ncols: usize) -> Result<Self> {
        let spec = Self {
            top_lat,
            left_lon,
            cell_size,
            nrows,
            ncols,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 30 arc-second global grid, 21600 x 43200 cells.
    pub fn global_30_arcsec() -> Self {
        Self {
            top_lat: 90.0,
            left_lon: -180.0,
            cell_size: 1.0 / 120.0,
            nrows: 21_600,
            ncols: 43_200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return bad(format!("cell_size must be positive, got {}", self.cell_size));
        }
        if self.nrows == 0 || self.ncols == 0 {
            return bad(format!("empty grid {}x{}", self.nrows, self.ncols));
        }
        if !self.top_lat.is_finite() || self.top_lat > 90.0 + EDGE_SNAP {
            return bad(format!("top_lat {} out of range", self.top_lat));
        }
        if !self.left_lon.is_finite() || self.left_lon < -180.0 - EDGE_SNAP {
            return bad(format!("left_lon {} out of range", self.left_lon));
        }
        if self.bottom_lat() < -90.0 - EDGE_SNAP {
            return bad(format!("grid extends south of -90 (bottom {})", self.bottom_lat()));
        }
        if self.right_lon() > 180.0 + EDGE_SNAP {
            return bad(format!("grid extends east of 180 (right {})", self.right_lon()));
        }
        Ok(())
    }

    pub fn bottom_lat(&self) -> f64 {
        self.top_lat - self.nrows as f64 * self.cell_size
    }

    pub fn right_lon(&self) -> f64 {
        self.left_lon + self.ncols as f64 * self.cell_size
    }

    pub fn cell_count(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn contains_index(&self, cell: CellIndex) -> bool {
        cell.row < self.nrows && cell.col < self.ncols
    }

    /// Checks two specs describe the same lattice, allowing for float noise
    /// picked up by text round trips.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= EDGE_SNAP * a.abs().max(b.abs()).max(1.0);
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && close(self.top_lat, other.top_lat)
            && close(self.left_lon, other.left_lon)
            && close(self.cell_size, other.cell_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: CellIndex,
    pub value: f64,
}

/// Floor of `q`, snapping to the nearest integer when `q` is within float
/// noise of it so that cell edges land deterministically.
fn snapped_floor(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() <= EDGE_SNAP * q.abs().max(1.0) {
        r
    } else {
        q.floor()
    }
}

/// Returns the cell containing `p`. Points on the south or east grid edge
/// map to the last row or column.
pub fn cell_of(p: GeoPoint, spec: &GridSpec) -> Result<CellIndex> {
    let row = snapped_floor((spec.top_lat - p.lat) / spec.cell_size);
    let col = snapped_floor((p.lon - spec.left_lon) / spec.cell_size);
    let (nrows, ncols) = (spec.nrows as f64, spec.ncols as f64);
    if !(0.0..=nrows).contains(&row) || !(0.0..=ncols).contains(&col) {
        return Err(Error::OutsideGrid { lat: p.lat, lon: p.lon });
    }
    Ok(CellIndex {
        row: (row as usize).min(spec.nrows - 1),
        col: (col as usize).min(spec.ncols - 1),
    })
}

pub fn center_of(cell: CellIndex, spec: &GridSpec) -> Result<GeoPoint> {
    if !spec.contains_index(cell) {
        return Err(Error::CellOutOfBounds {
            row: cell.row as i64,
            col: cell.col as i64,
            nrows: spec.nrows,
            ncols: spec.ncols,
        });
    }
    Ok(GeoPoint {
        lat: spec.top_lat - (cell.row as f64 + 0.5) * spec.cell_size,
        lon: spec.left_lon + (cell.col as f64 + 0.5) * spec.cell_size,
    })
}

/// Cells whose center lies inside `b`, in row-major order.
///
/// Only the index window covering the boundary's bbox is visited. A boundary
/// entirely outside the grid yields an empty set.
pub fn rasterize_boundary(b: &PolygonBoundary, spec: &GridSpec) -> Vec<CellIndex> {
    let bb = b.bbox();
    if bb.max_lat < spec.bottom_lat()
        || bb.min_lat > spec.top_lat
        || bb.max_lon < spec.left_lon
        || bb.min_lon > spec.right_lon()
    {
        return Vec::new();
    }
    let clamp = |v: f64, hi: usize| v.max(0.0).min((hi - 1) as f64) as usize;
    let row_lo = clamp(((spec.top_lat - bb.max_lat) / spec.cell_size).floor(), spec.nrows);
    let row_hi = clamp(((spec.top_lat - bb.min_lat) / spec.cell_size).floor(), spec.nrows);
    let col_lo = clamp(((bb.min_lon - spec.left_lon) / spec.cell_size).floor(), spec.ncols);
    let col_hi = clamp(((bb.max_lon - spec.left_lon) / spec.cell_size).floor(), spec.ncols);

    let mut out = Vec::new();
    for row in row_lo..=row_hi {
        let lat = spec.top_lat - (row as f64 + 0.5) * spec.cell_size;
        for col in col_lo..=col_hi {
            let lon = spec.left_lon + (col as f64 + 0.5) * spec.cell_size;
            if point_in_boundary(GeoPoint { lat, lon }, b) {
                out.push(CellIndex { row, col });
            }
        }
    }
    out
}

/// Multiply-accumulate of a data matrix against a 0/1 polygon mask.
///
/// This is the dense formulation of the polygon query; production code runs
/// the sparse join instead and uses this as a reference.
pub fn dense_raster_query(data: &[Vec<f64>], mask: &[Vec<u8>]) -> Result<f64> {
    if data.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} data rows vs {} mask rows",
            data.len(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    for (i, (drow, mrow)) in data.iter().zip(mask).enumerate() {
        if drow.len() != mrow.len() {
            return Err(Error::DimensionMismatch(format!(
                "row {i}: {} data columns vs {} mask columns",
                drow.len(),
                mrow.len()
            )));
        }
        for (d, m) in drow.iter().zip(mrow) {
            sum += d * f64::from(*m);
        }
    }
    Ok(sum)
}

/// Expands sparse records into a dense `nrows x ncols` matrix; absent cells
/// are zero.
pub fn densify(cells: &[CellRecord], spec: &GridSpec) -> Result<Vec<Vec<f64>>> {
    let mut m = vec![vec![0.0; spec.ncols]; spec.nrows];
    for c in cells {
        if !spec.contains_index(c.cell) {
            return Err(Error::CellOutOfBounds {
                row: c.cell.row as i64,
                col: c.cell.col as i64,
                nrows: spec.nrows,
                ncols: spec.ncols,
            });
        }
        m[c.cell.row][c.cell.col] = c.value;
    }
    Ok(m)
}

/// Binary mask with ones at the given cells.
pub fn mask_of(cells: &[CellIndex], spec: &GridSpec) -> Vec<Vec<u8>> {
    let mut m = vec![vec![0u8; spec.ncols]; spec.nrows];
    for c in cells.iter().filter(|c| spec.contains_index(**c)) {
        m[c.row][c.col] = 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Ring;
    use approx::assert_abs_diff_eq;

    fn square(lat0: f64, lon0: f64, lat1: f64, lon1: f64) -> PolygonBoundary {
        let ring = Ring::new(vec![
            GeoPoint::new(lat0, lon0).unwrap(),
            GeoPoint::new(lat0, lon1).unwrap(),
            GeoPoint::new(lat1, lon1).unwrap(),
            GeoPoint::new(lat1, lon0).unwrap(),
        ])
        .unwrap();
        PolygonBoundary::new("sq", "sq", None, vec![ring]).unwrap()
    }

    #[test]
    fn global_cell_lookup() {
        let g = GridSpec::global_30_arcsec();
        g.validate().unwrap();
        let p = |lat, lon| GeoPoint::new(lat, lon).unwrap();
        assert_eq!(cell_of(p(89.9999, -179.9999), &g).unwrap(), CellIndex::new(0, 0));
        assert_eq!(cell_of(p(0.0, 0.0), &g).unwrap(), CellIndex::new(10800, 21600));
        assert_eq!(
            cell_of(p(-89.9999, 179.9999), &g).unwrap(),
            CellIndex::new(21599, 43199)
        );
        assert_eq!(cell_of(p(-90.0, 180.0), &g).unwrap(), CellIndex::new(21599, 43199));
    }

    #[test]
    fn outside_grid_is_an_error() {
        let g = GridSpec::new(2.0, 0.0, 1.0, 2, 2).unwrap();
        assert!(matches!(
            cell_of(GeoPoint::new(3.0, 0.5).unwrap(), &g),
            Err(Error::OutsideGrid { .. })
        ));
        assert!(cell_of(GeoPoint::new(1.0, -0.5).unwrap(), &g).is_err());
        assert!(center_of(CellIndex::new(2, 0), &g).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 1, 1).is_err());
        assert!(GridSpec::new(0.0, 0.0, 1.0, 0, 1).is_err());
        assert!(GridSpec::new(-89.0, 0.0, 1.0, 2, 1).is_err());
        assert!(GridSpec::new(0.0, 179.0, 1.0, 1, 2).is_err());
    }

    #[test]
    fn centers() {
        let g = GridSpec::global_30_arcsec();
        let c = center_of(CellIndex::new(0, 0), &g).unwrap();
        assert_abs_diff_eq!(c.lat, 89.99583333, epsilon = 1e-8);
        assert_abs_diff_eq!(c.lon, -179.99583333, epsilon = 1e-8);
        let small = GridSpec::new(1.0, 0.0, 0.5, 2, 2).unwrap();
        let c = center_of(CellIndex::new(1, 1), &small).unwrap();
        assert_eq!((c.lat, c.lon), (0.25, 0.75));
    }

    #[test]
    fn center_round_trip_on_global_grid_samples() {
        let g = GridSpec::global_30_arcsec();
        for row in (0..g.nrows).step_by(997).chain([g.nrows - 1]) {
            for col in (0..g.ncols).step_by(1999).chain([g.ncols - 1]) {
                let c = CellIndex::new(row, col);
                assert_eq!(cell_of(center_of(c, &g).unwrap(), &g).unwrap(), c);
            }
        }
    }

    #[test]
    fn rasterize_examples() {
        let g = GridSpec::new(2.0, 0.0, 1.0, 2, 2).unwrap();
        let cells = rasterize_boundary(&square(0.0, 0.0, 2.0, 2.0), &g);
        assert_eq!(
            cells,
            vec![
                CellIndex::new(0, 0),
                CellIndex::new(0, 1),
                CellIndex::new(1, 0),
                CellIndex::new(1, 1)
            ]
        );
        assert!(rasterize_boundary(&square(0.0, 0.0, 0.1, 0.1), &g).is_empty());
        assert!(rasterize_boundary(&square(10.0, 10.0, 11.0, 11.0), &g).is_empty());
    }

    #[test]
    fn dense_query_examples() {
        let data = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(dense_raster_query(&data, &[vec![1, 0], vec![0, 1]]).unwrap(), 5.0);
        assert_eq!(dense_raster_query(&data, &[vec![1, 1], vec![1, 1]]).unwrap(), 10.0);
        assert_eq!(dense_raster_query(&data, &[vec![0, 0], vec![0, 0]]).unwrap(), 0.0);
        assert!(dense_raster_query(&data, &[vec![1, 1]]).is_err());
        assert!(dense_raster_query(&data, &[vec![1, 1], vec![1]]).is_err());
    }
}
