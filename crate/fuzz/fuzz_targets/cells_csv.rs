#![no_main]

use libfuzzer_sys::fuzz_target;
use polyagg::GridSpec;

fuzz_target!(|data: &[u8]| {
    let spec = GridSpec::new(10.0, -10.0, 0.5, 40, 40).unwrap();
    if let Ok(cells) = polyagg::ingest::tables::read_cells_csv(data, &spec) {
        for c in &cells {
            assert!(spec.contains_index(c.cell));
        }
    }
});
