#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = orthnewton::io::parse_csv_samples(data) {
        assert_eq!(table.names.len(), table.samples.n());
        assert!(table.samples.matrix().iter().all(|v| v.is_finite()));
    }
});
