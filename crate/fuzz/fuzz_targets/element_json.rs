#![no_main]

use libfuzzer_sys::fuzz_target;
use srt_core::local_field::{ElementJson, LocalFieldElement};

fuzz_target!(|data: &[u8]| {
    if let Ok(j) = serde_json::from_slice::<ElementJson>(data) {
        if let Ok(x) = LocalFieldElement::from_json(&j) {
            let _ = x.pretty();
            let _ = LocalFieldElement::from_json(&x.to_json()).expect("round trip");
        }
    }
});
