#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::fixture::Recipe;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(recipe) = Recipe::from_json_str(text) else { return };
    let _ = recipe.validate();
});
