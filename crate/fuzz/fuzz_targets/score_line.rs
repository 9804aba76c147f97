#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::predictor::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(v) = wire::parse_score_line(line) {
            assert!(v.is_finite());
        }
    }
});
