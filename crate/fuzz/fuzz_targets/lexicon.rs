#![no_main]

use holo_core::corpus::LexiconTagger;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = LexiconTagger::parse(text);
    }
});
