#![no_main]

use holo_core::lm::decode_remote_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&size, body)) = data.split_first() else { return };
    let vocab_size = size as usize + 1;
    if let Ok(resp) = decode_remote_response(body, vocab_size) {
        if let Ok(dist) = resp.into_dist(vocab_size) {
            assert!(dist.total_mass() <= 1.0 + 1e-6);
        }
    }
});
