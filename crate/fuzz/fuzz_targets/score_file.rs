#![no_main]

use lazylab::data::{parse_scores, quantile_bins};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scores) = parse_scores(text) {
        assert!(scores.iter().all(|s| s.is_finite()));
        if let Ok(bins) = quantile_bins(&scores, 10) {
            assert_eq!(bins.len(), scores.len());
            assert!(bins.iter().all(|&b| b < 10));
        }
    }
});
