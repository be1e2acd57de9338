#![no_main]
use klq::datasets::{decode_count_table, encode_count_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_count_table(data) {
        assert_eq!(encode_count_table(&d), data);
    }
});
