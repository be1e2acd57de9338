#![no_main]
use klq::records::CodeFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = CodeFile::decode(data) {
        assert!(f.codes.iter().all(|&c| c <= f.levels));
        let bytes = f.encode().expect("decoded file re-encodes");
        assert_eq!(CodeFile::decode(&bytes).unwrap(), f);
    }
});
