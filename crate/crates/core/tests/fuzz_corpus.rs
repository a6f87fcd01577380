//! Replays the checked-in fuzz seed corpora through every parser, with the
//! same checks the fuzz targets make. Runs on stable without libFuzzer.

use std::fs;
use std::path::Path;

use polyagg::engine::read_aggregates_csv;
use polyagg::ingest::tables::*;
use polyagg::ingest::{edges_to_points, parse_boundary_geojson, parse_polygon_string, read_ascii_grid};
use polyagg::GridSpec;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds for {target}");
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn geojson_seeds() {
    let mut ok = 0;
    for data in seeds("geojson") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(boundaries) = parse_boundary_geojson(text) {
            ok += 1;
            for b in &boundaries {
                for ring in b.rings() {
                    assert!(ring.vertices().len() >= 3);
                    assert!(ring.vertices().iter().all(|v| b.bbox().contains(*v)));
                }
            }
        }
    }
    assert!(ok >= 2);
}

#[test]
fn polygon_string_seeds() {
    for data in seeds("polygon_string") {
        if let Ok(ring) = parse_polygon_string(std::str::from_utf8(&data).unwrap()) {
            assert!(ring.vertices().len() >= 3);
            assert_ne!(ring.vertices().first(), ring.vertices().last());
        }
    }
}

#[test]
fn ascii_grid_seeds() {
    for data in seeds("ascii_grid") {
        if let Ok((spec, cells)) = read_ascii_grid(&data[..]) {
            assert!(cells.iter().all(|c| spec.contains_index(c.cell)));
        }
    }
}

#[test]
fn cells_csv_seeds() {
    let spec = GridSpec::new(10.0, -10.0, 0.5, 40, 40).unwrap();
    for data in seeds("cells_csv") {
        if let Ok(cells) = read_cells_csv(&data[..], &spec) {
            assert!(cells.iter().all(|c| spec.contains_index(c.cell)));
        }
    }
}

#[test]
fn edges_csv_seeds() {
    for data in seeds("edges_csv") {
        if let Ok(edges) = read_edges_csv(&data[..]) {
            let conv = edges_to_points(&edges);
            assert_eq!(conv.points.len() + conv.skipped, edges.len());
        }
    }
}

#[test]
fn grid_spec_seeds() {
    for data in seeds("grid_spec") {
        if let Ok(spec) = read_grid_spec_json(&data[..]) {
            assert!(spec.validate().is_ok());
        }
    }
}

#[test]
fn table_seeds_do_not_panic() {
    for data in seeds("points_csv") {
        let _ = read_points_csv(&data[..]);
    }
    for data in seeds("gdp_csv") {
        let _ = read_gdp_csv(&data[..]);
    }
    for data in seeds("boundary_catalog") {
        let _ = read_boundary_catalog(&data[..]);
    }
    for data in seeds("city_catalog") {
        let _ = read_city_catalog_csv(&data[..]);
    }
    for data in seeds("joined_csv") {
        let _ = read_joined_csv(&data[..]);
    }
    for data in seeds("aggregates_csv") {
        let _ = read_aggregates_csv(&data[..]);
    }
}

fn all_parsers(data: &[u8]) {
    let spec = GridSpec::new(10.0, -10.0, 0.5, 40, 40).unwrap();
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_boundary_geojson(text);
        let _ = parse_polygon_string(text);
    }
    let _ = read_ascii_grid(data);
    let _ = read_cells_csv(data, &spec);
    let _ = read_points_csv(data);
    let _ = read_edges_csv(data).map(|e| edges_to_points(&e));
    let _ = read_gdp_csv(data);
    let _ = read_boundary_catalog(data);
    let _ = read_grid_spec_json(data);
    let _ = read_city_catalog_csv(data);
    let _ = read_joined_csv(data);
    let _ = read_aggregates_csv(data);
}

mod mutations {
    use super::*;
    use proptest::prelude::*;

    const TARGETS: [&str; 12] = [
        "geojson",
        "polygon_string",
        "ascii_grid",
        "points_csv",
        "cells_csv",
        "edges_csv",
        "gdp_csv",
        "boundary_catalog",
        "grid_spec",
        "city_catalog",
        "joined_csv",
        "aggregates_csv",
    ];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn mutated_seeds_never_panic(
            target in 0..TARGETS.len(),
            pick in any::<prop::sample::Index>(),
            edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0u8..3), 0..8),
            cut in any::<prop::sample::Index>(),
        ) {
            let pool = seeds(TARGETS[target]);
            let mut data = pool[pick.index(pool.len())].clone();
            for (at, byte, op) in edits {
                let i = at.index(data.len() + 1);
                match op {
                    0 if i < data.len() => data[i] = byte,
                    1 => data.insert(i, byte),
                    _ if i < data.len() => { data.remove(i); }
                    _ => {}
                }
            }
            data.truncate(cut.index(data.len() + 1).max(data.len() / 2));
            all_parsers(&data);
        }
    }
}
