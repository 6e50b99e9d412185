#![no_main]

use holo_core::lm::{LanguageModel, NgramLm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lm) = NgramLm::parse(text) {
        // Whatever parses must serialize back to something equivalent.
        let again = NgramLm::parse(&lm.to_text()).expect("round trip");
        assert_eq!(again.vocab().len(), lm.vocab().len());
        let _ = lm.next_token_dist(&[], &[]);
    }
});
