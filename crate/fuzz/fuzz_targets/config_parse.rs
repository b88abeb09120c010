#![no_main]

use fuzzkd::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_toml(text) else {
        return;
    };
    if cfg.validate().is_ok() {
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).expect("valid config round trips");
        assert_eq!(cfg, back);
    }
});
