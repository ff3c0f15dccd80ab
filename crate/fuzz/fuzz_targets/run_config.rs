#![no_main]

use lazylab::harness::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = toml::from_str::<RunConfig>(text) {
        let _ = cfg.validate();
        let _ = cfg.dataset.build();
    }
});
