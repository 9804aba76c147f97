#![no_main]

use libfuzzer_sys::fuzz_target;
use xplmark_core::stats::{sign_test_all_pairs, vote_counts, VoteTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = VoteTable::from_csv(data) {
        let _ = vote_counts(&table);
        let _ = sign_test_all_pairs(&table, 0.05);
    }
});
