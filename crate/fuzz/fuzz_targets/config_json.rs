#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::pipeline::{FrameSpec, PipelineConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = FrameSpec::parse_list(text);
    let Ok(config) = PipelineConfig::from_json_str(text) else { return };
    let again = PipelineConfig::from_json_str(&config.canonical_json()).expect("canonical config parses");
    assert_eq!(again.fingerprint(), config.fingerprint());
});
