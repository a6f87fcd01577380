#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((spec, cells)) = polyagg::ingest::read_ascii_grid(data) {
        for c in &cells {
            assert!(spec.contains_index(c.cell));
        }
    }
});
