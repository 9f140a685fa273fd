#![no_main]

use flowcert::vten;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = vten::decode(data) {
        // Values are stored as f32, so a second pass is exact.
        let once = vten::encode(&t);
        let back = vten::decode(&once).expect("re-encoded tensor decodes");
        assert_eq!(back.dims(), t.dims());
        assert_eq!(vten::encode(&back), once);
    }
});
