#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::maskio::MaskPack;
use xplmark_core::segment::LabelVolume;

fuzz_target!(|data: &[u8]| {
    if let Ok(pack) = MaskPack::decode(data) {
        if let Ok(labels) = LabelVolume::from_pack(&pack) {
            assert_eq!(LabelVolume::from_pack(&labels.to_pack()).unwrap(), labels);
        }
    }
});
