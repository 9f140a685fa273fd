#![no_main]

use flowcert::net::nnwf;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = nnwf::decode(data) {
        let once = nnwf::encode(&net);
        let back = nnwf::decode(&once).expect("re-encoded network decodes");
        assert_eq!(nnwf::encode(&back), once);
    }
});
