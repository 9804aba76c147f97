#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::maskio::MaskPack;

fuzz_target!(|data: &[u8]| {
    if let Ok(pack) = MaskPack::decode(data) {
        assert_eq!(pack.encode(), data);
        let _ = pack.to_mask_sequence("f");
        let _ = pack.to_signed_sequence("f");
    }
});
