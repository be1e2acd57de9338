#![no_main]
use klq::records::{read_loss_csv, write_loss_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_loss_csv(data) {
        let mut out = Vec::new();
        write_loss_csv(&mut out, &rows).unwrap();
        assert_eq!(read_loss_csv(&out[..]).unwrap().len(), rows.len());
    }
});
