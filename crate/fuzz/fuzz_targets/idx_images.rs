#![no_main]

use libfuzzer_sys::fuzz_target;
use sepsa::data::{decode_idx_images, encode_idx_images};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = decode_idx_images(data) {
        assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
        assert!(data.starts_with(&encode_idx_images(&images)));
    }
});
