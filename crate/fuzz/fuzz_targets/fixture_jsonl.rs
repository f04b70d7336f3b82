#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::evaluation::{read_fixtures, write_fixtures};

fuzz_target!(|data: &[u8]| {
    let Ok(fixtures) = read_fixtures(data) else { return };
    let written = write_fixtures(&fixtures);
    let again = read_fixtures(written.as_bytes()).expect("written fixtures parse");
    assert_eq!(again, fixtures);
});
