#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ring) = polyagg::ingest::parse_polygon_string(text) {
        assert!(ring.vertices().len() >= 3);
        assert_ne!(ring.vertices().first(), ring.vertices().last());
    }
});
