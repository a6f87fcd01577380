//! Planar geometry kernels over WGS84 coordinates.
//!
//! Containment is evaluated in (lat, lon) degree space with straight edges,
//! using Franklin's ray-crossing parity test. Distances are great-circle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for great-circle lengths, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 location in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

/// A closed ring stored without its closing vertex.
///
/// The edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<GeoPoint>,
}

impl Ring {
    /// Builds a ring, dropping a repeated closing vertex and consecutive
    /// duplicates. Fails if fewer than three distinct vertices remain.
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::DegenerateRing("empty polygon".into()));
        }
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let mut distinct: Vec<(u64, u64)> = vertices.iter().map(|p| (p.lat.to_bits(), p.lon.to_bits())).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(Error::DegenerateRing(format!(
                "{} distinct vertices, need at least 3",
                distinct.len()
            )));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterates edges as `(previous, current)` pairs, starting with the
    /// implicit closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[(i + n - 1) % n], self.vertices[i]))
    }
}

/// Axis-aligned extent in degrees. Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    fn empty() -> Self {
        Self {
            min_lat: f64::INFINITY,
            min_lon: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            max_lon: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, p: GeoPoint) {
        self.min_lat = self.min_lat.min(p.lat);
        self.min_lon = self.min_lon.min(p.lon);
        self.max_lat = self.max_lat.max(p.lat);
        self.max_lon = self.max_lon.max(p.lon);
    }

    #[inline]
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn as_tuple(&self) -> (f64, f64, f64, f64) {
        (self.min_lat, self.min_lon, self.max_lat, self.max_lon)
    }
}

/// A city boundary: one or more rings combined by the even-odd rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonBoundary {
    pub id: String,
    pub name: String,
    pub country: Option<String>,
    rings: Vec<Ring>,
    bbox: BBox,
}

impl PolygonBoundary {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        country: Option<String>,
        rings: Vec<Ring>,
    ) -> Result<Self> {
        let id = id.into();
        if rings.is_empty() {
            return Err(Error::EmptyBoundary(id));
        }
        let mut bbox = BBox::empty();
        for p in rings.iter().flat_map(|r| r.vertices()) {
            bbox.extend(*p);
        }
        Ok(Self {
            id,
            name: name.into(),
            country,
            rings,
            bbox,
        })
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }
}

#[inline]
fn crossing_parity(p: GeoPoint, ring: &Ring) -> bool {
    let mut inside = false;
    for (a, b) in ring.edges() {
        // half-open span test first, so horizontal edges never reach the division
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lon_at = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if p.lon < lon_at {
                inside = !inside;
            }
        }
    }
    inside
}

/// Franklin's ray-crossing test for a single ring.
///
/// Points exactly on an edge get half-open treatment: whether they count as
/// inside depends on the edge orientation.
pub fn point_in_polygon(p: GeoPoint, ring: &Ring) -> bool {
    crossing_parity(p, ring)
}

/// Even-odd containment over every ring of the boundary. Holes subtract and
/// disjoint parts union.
pub fn point_in_boundary(p: GeoPoint, b: &PolygonBoundary) -> bool {
    b.rings.iter().fold(false, |acc, ring| acc ^ crossing_parity(p, ring))
}

pub fn bbox_of(b: &PolygonBoundary) -> BBox {
    b.bbox
}

/// Haversine great-circle distance in meters.
pub fn haversine_length(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Arithmetic midpoint in degree space. Pairs that would cross the
/// antimeridian are rejected.
pub fn midpoint(a: GeoPoint, b: GeoPoint) -> Result<GeoPoint> {
    if (a.lon - b.lon).abs() >= 180.0 {
        return Err(Error::AntimeridianCrossing(a.lon, b.lon));
    }
    Ok(GeoPoint {
        lat: (a.lat + b.lat) / 2.0,
        lon: (a.lon + b.lon) / 2.0,
    })
}
