#![no_main]
use klq::compander::{build_compander, CompanderSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = text.parse::<CompanderSpec>() else {
        return;
    };
    let again: CompanderSpec = spec.to_string().parse().expect("printed spec parses");
    assert_eq!(again.to_string(), spec.to_string());
    if let Ok(f) = build_compander(&spec) {
        let y = f.forward(0.5);
        assert!((0.0..=1.0).contains(&y));
    }
});
