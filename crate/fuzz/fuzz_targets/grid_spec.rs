#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = polyagg::ingest::tables::read_grid_spec_json(data) {
        assert!(spec.validate().is_ok());
    }
});
