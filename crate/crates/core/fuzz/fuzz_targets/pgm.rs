#![no_main]

use flowcert::pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = pgm::decode(data) {
        assert!(frame.values().iter().all(|x| (0.0..=1.0).contains(x)));
        // The encoder writes 8-bit samples, so only the second pass is exact.
        let bytes = pgm::encode(&frame).expect("decoded frame encodes");
        let back = pgm::decode(&bytes).expect("encoded frame decodes");
        assert_eq!(back.dims(), frame.dims());
        assert_eq!(pgm::encode(&back).unwrap(), bytes);
    }
});
