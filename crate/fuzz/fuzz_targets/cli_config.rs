#![no_main]

use lazylab_cli::commands::{examples::ExamplesConfig, noisy::NoisyConfig, toy2d::Toy2dConfig};
use lazylab_cli::config::parse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // first line, if it looks like one, doubles as a --set override
    let overrides: Vec<String> = text
        .lines()
        .next()
        .filter(|l| l.contains('=') && !l.contains('['))
        .map(|l| vec![l.to_string()])
        .unwrap_or_default();
    let _ = parse::<Toy2dConfig>(Some(text), &[]);
    let _ = parse::<NoisyConfig>(Some(text), &overrides);
    let _ = parse::<ExamplesConfig>(None, &overrides);
});
