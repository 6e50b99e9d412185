#![no_main]

use holo_core::corpus::parse_stage_pairs;
use holo_core::insertion::is_subsequence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_stage_pairs(text) {
        for p in pairs {
            assert!(p.coarse.len() < p.fine.len());
            assert!(is_subsequence(&p.coarse, &p.fine));
        }
    }
});
