#![no_main]

use flowcert::bounds::BoundsTrace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = BoundsTrace::parse_csv(text) {
        let csv = trace.to_csv();
        let back = BoundsTrace::parse_csv(&csv).expect("written trace parses");
        assert_eq!(back.to_csv(), csv);
    }
});
