#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = polyagg::ingest::tables::read_city_catalog_csv(data);
});
