#![no_main]
use klq::records::parse_vector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_vector(text) {
        assert!(!v.is_empty());
    }
});
