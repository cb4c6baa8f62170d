#![no_main]

#[allow(dead_code)]
#[path = "../../crates/cli/src/config.rs"]
mod config;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(f) = config::ConfigFile::parse(s) {
            let mut c = config::Config::default();
            c.apply(f);
            let _ = c.validate();
        }
    }
});
