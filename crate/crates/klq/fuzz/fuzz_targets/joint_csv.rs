#![no_main]
use klq::records::{parse_joint_csv, write_joint_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(j) = parse_joint_csv(text) {
        let mut out = Vec::new();
        write_joint_csv(&mut out, &j).unwrap();
        let back = parse_joint_csv(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, j);
        assert!(j.mutual_information() >= -1e-12);
    }
});
