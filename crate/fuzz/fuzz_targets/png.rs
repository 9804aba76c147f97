#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::maskio::{decode_png, encode_png};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_png(data) {
        let bytes = encode_png(&frame).expect("decoded frame encodes");
        assert_eq!(decode_png(&bytes).expect("round trip"), frame);
    }
});
