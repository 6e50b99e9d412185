#![no_main]

use holo_core::eval::parse_score;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = parse_score(&String::from_utf8_lossy(data)) {
        assert!((1..=5).contains(&s));
    }
});
