#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::selection::{filter_pool, read_bbox_csv, DEFAULT_THRESHOLD};

fuzz_target!(|data: &[u8]| {
    if let Ok(seqs) = read_bbox_csv(data) {
        let sel = filter_pool(&seqs, DEFAULT_THRESHOLD);
        assert_eq!(sel.accepted.len() + sel.rejected.len(), seqs.len());
    }
});
