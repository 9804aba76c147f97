#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::predictor::ToyLinearWeights;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = ToyLinearWeights::from_json(s);
    }
});
