#![no_main]

use libfuzzer_sys::fuzz_target;
use srt_core::filtration::Filtration;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(f) = Filtration::from_json(s) {
            let h = f.conductor();
            let _ = f.psi(&h).and_then(|x| f.phi(&x));
        }
    }
});
