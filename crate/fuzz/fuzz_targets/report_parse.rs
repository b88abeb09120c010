#![no_main]

use fuzzkd::metrics::MetricsReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = MetricsReport::from_json(text) {
            let _ = report.render();
        }
    }
});
