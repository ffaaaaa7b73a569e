#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = sepsa::harness::parse_config(text) {
            assert!(cfg.lr > 0.0 && cfg.epochs >= 1 && !cfg.seeds.is_empty() && cfg.hidden_dim >= 1);
        }
    }
});
