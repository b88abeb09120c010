#![no_main]

use fuzzkd::nn::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::decode(data) {
        // metadata whitespace may change once, after that encoding is fixed
        let once = ck.encode();
        let again = Checkpoint::decode(&once).expect("re-encoded checkpoint decodes");
        assert_eq!(once, again.encode());
        let _ = ck.to_network();
    }
});
