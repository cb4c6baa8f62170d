#![no_main]

use libfuzzer_sys::fuzz_target;
use srt_core::valuation::{fmt_rational, parse_rational};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(r) = parse_rational(s) {
            assert_eq!(parse_rational(&fmt_rational(&r)).ok(), Some(r));
        }
    }
});
