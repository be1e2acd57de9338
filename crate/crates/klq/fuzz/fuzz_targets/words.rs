#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = klq::datasets::word_frequencies(data) {
        let f = d.frequencies();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(d.symbols.iter().all(|s| !s.is_empty()));
    }
});
