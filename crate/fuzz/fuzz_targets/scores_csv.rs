#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::stats::{balanced_accuracy, read_scores_csv, roc_auc};

fuzz_target!(|data: &[u8]| {
    if let Ok((scores, labels)) = read_scores_csv(data) {
        if let Ok(auc) = roc_auc(&scores, &labels) {
            assert!((0.0..=1.0).contains(&auc));
        }
        let _ = balanced_accuracy(&scores, &labels, 0.5);
    }
});
