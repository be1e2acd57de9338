#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Some((&k, rest)) = data.split_first() {
        if let Ok(d) = klq::datasets::kmer_frequencies(rest, (k % 8) as usize) {
            assert_eq!(d.symbols.len(), d.counts.len());
            assert!(d.counts.iter().sum::<u64>() > 0);
        }
    }
});
