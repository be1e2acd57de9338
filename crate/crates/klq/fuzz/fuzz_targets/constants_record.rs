#![no_main]
use klq::constants::{parse_constants_cache, MaximinConstants};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = text.parse::<MaximinConstants>() {
        assert_eq!(c.to_string().parse::<MaximinConstants>().unwrap(), c);
    }
    let _ = parse_constants_cache(text);
});
