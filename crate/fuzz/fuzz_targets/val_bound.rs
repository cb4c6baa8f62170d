#![no_main]

use libfuzzer_sys::fuzz_target;
use srt_core::series::ValBound;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = s.parse::<ValBound>();
    }
});
