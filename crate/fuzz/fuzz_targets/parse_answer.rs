#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::evaluation::QueryType;
use sem4d_gateway::parse_answer;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    for q in QueryType::ALL {
        if let Some(p) = parse_answer(&text, q) {
            assert!(p.fits(q), "{p:?} does not fit {q}");
        }
    }
});
