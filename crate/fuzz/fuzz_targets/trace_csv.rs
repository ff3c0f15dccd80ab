#![no_main]

use lazylab::harness::GroupedTrace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = GroupedTrace::parse_csv(data) {
        // whatever parses must survive a write/parse round trip
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).expect("write parsed trace");
        let again = GroupedTrace::parse_csv(buf.as_slice()).expect("reparse written trace");
        assert_eq!(again.group_names, trace.group_names);
        assert_eq!(again.records.len(), trace.records.len());
    }
});
