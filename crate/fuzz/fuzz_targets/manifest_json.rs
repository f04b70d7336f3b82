#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::scene_io::SceneManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(manifest) = SceneManifest::from_json_str(text) else { return };
    let _ = manifest.check_structure();
    let _ = manifest.primary_init_timestep();
    // Whatever parses must survive a write/read cycle unchanged.
    let written = manifest.to_json_string();
    let again = SceneManifest::from_json_str(&written).expect("written manifest parses");
    assert_eq!(again.to_json_string(), written);
});
