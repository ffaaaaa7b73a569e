#![no_main]

use libfuzzer_sys::fuzz_target;
use sepsa::data::{decode_idx_labels, encode_idx_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = decode_idx_labels(data) {
        assert!(data.starts_with(&encode_idx_labels(&labels)));
    }
});
