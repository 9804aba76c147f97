#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::predictor::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = wire::decode_batch(data) {
        let refs: Vec<_> = frames.iter().collect();
        assert_eq!(wire::encode_batch(&refs).unwrap(), data);
    }
});
