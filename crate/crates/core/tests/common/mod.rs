//! Reference implementations used as oracles by the integration tests.
//! Nothing here calls into the engine's containment or aggregation code.

#![allow(dead_code)]

use std::f64::consts::TAU;

use polyagg::{GeoPoint, PointRecord, PolygonBoundary, Ring};
use rand::Rng;

/// Winding number of `ring` around `p` (Sunday's crossing-direction form),
/// with x = lon and y = lat.
pub fn winding_number(p: (f64, f64), ring: &[(f64, f64)]) -> i32 {
    let (py, px) = p;
    let is_left = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) * (py - a.0) - (px - a.1) * (b.0 - a.0);
    let n = ring.len();
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if a.0 <= py {
            if b.0 > py && is_left(a, b) > 0.0 {
                wn += 1;
            }
        } else if b.0 <= py && is_left(a, b) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Euclidean distance in degree space from `p` to the segment `ab`.
pub fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

pub fn min_edge_distance(p: (f64, f64), ring: &[(f64, f64)]) -> f64 {
    (0..ring.len())
        .map(|i| segment_distance(p, ring[i], ring[(i + 1) % ring.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// A random simple (star-shaped, generally concave) polygon as (lat, lon)
/// pairs: sorted angles around a center, random radii.
pub fn random_simple_polygon<R: Rng>(rng: &mut R, n: usize, center: (f64, f64), radius: f64) -> Vec<(f64, f64)> {
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    angles
        .iter()
        .map(|a| {
            let r = radius * rng.random_range(0.1..1.0);
            (center.0 + r * a.sin(), center.1 + r * a.cos())
        })
        .collect()
}

pub fn to_ring(coords: &[(f64, f64)]) -> Ring {
    Ring::new(coords.iter().map(|&(a, b)| GeoPoint::new(a, b).unwrap()).collect()).unwrap()
}

pub fn boundary(id: &str, rings: Vec<Ring>) -> PolygonBoundary {
    PolygonBoundary::new(id, id, None, rings).unwrap()
}

/// Even-odd containment over multiple rings via winding numbers.
pub fn oracle_contains(p: GeoPoint, b: &PolygonBoundary) -> bool {
    b.rings()
        .iter()
        .map(|r| {
            let coords: Vec<(f64, f64)> = r.vertices().iter().map(|v| (v.lat, v.lon)).collect();
            winding_number((p.lat, p.lon), &coords) != 0
        })
        .fold(false, |acc, inside| acc ^ inside)
}

/// Neumaier summation, written out independently of the engine's.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

/// Naive single-threaded double loop: every point against every boundary,
/// no prefilter. Returns (sum, count) per boundary.
pub fn naive_vector_query(points: &[PointRecord], boundaries: &[PolygonBoundary]) -> Vec<(f64, u64)> {
    boundaries
        .iter()
        .map(|b| {
            let inside: Vec<f64> = points
                .iter()
                .filter(|p| oracle_contains(p.location, b))
                .map(|p| p.value)
                .collect();
            (neumaier(inside.iter().copied()), inside.len() as u64)
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) || a == b
}
