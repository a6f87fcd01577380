#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(boundaries) = polyagg::ingest::parse_boundary_geojson(text) {
        for b in &boundaries {
            assert!(!b.rings().is_empty());
            for ring in b.rings() {
                assert!(ring.vertices().len() >= 3);
                for v in ring.vertices() {
                    assert!(b.bbox().contains(*v));
                }
            }
        }
    }
});
