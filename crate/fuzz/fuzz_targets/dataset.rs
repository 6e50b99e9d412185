#![no_main]

use holo_core::pipeline::parse_dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let d = parse_dataset(text);
        let lines = text.lines().filter(|l| !l.trim().is_empty()).count();
        assert_eq!(d.rows.len() + d.malformed.len(), lines);
    }
});
