#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(edges) = polyagg::ingest::tables::read_edges_csv(data) {
        let conv = polyagg::ingest::edges_to_points(&edges);
        assert_eq!(conv.points.len() + conv.skipped, edges.len());
    }
});
