#![no_main]
use libfuzzer_sys::fuzz_target;

// Arbitrary TOML into the config loader: unknown fields, wrong types and
// out-of-range values must come back as errors.
fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = ris_chanest::config::SystemConfig::from_toml_str(s);
    }
});
