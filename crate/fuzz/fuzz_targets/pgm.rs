#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::maskio::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = decode_pgm(data) {
        let again = decode_pgm(&encode_pgm(&grid)).expect("re-encoded PGM decodes");
        assert_eq!(again.dims(), grid.dims());
    }
});
