#![no_main]

use fuzzkd::metrics::Predictions;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = Predictions::parse_csv(text) {
            let _ = p.report();
        }
    }
});
