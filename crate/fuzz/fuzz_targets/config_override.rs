#![no_main]

use holo_core::pipeline::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut config = PipelineConfig::default();
    let before = config.clone();
    if config.apply_override(text).is_err() {
        assert_eq!(config, before, "failed override must leave the config alone");
    } else {
        config.validate().unwrap();
    }
});
