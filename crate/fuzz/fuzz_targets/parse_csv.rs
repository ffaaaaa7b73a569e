#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = sepsa::data::parse_csv(data, "fuzz", &["y"]) {
        assert!(ds.samples.iter().all(|s| s.x.len() == ds.input_dim && s.y.len() == 1));
        assert!(ds.samples.iter().flat_map(|s| s.x.iter().chain(&s.y)).all(|v| v.is_finite()));
    }
});
