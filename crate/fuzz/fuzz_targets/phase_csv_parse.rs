#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(gamma) = ris_chanest::csvio::parse_phase_csv(s) {
            assert!(gamma.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-6));
        }
    }
});
