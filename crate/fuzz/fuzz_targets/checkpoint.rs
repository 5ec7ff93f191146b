#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(ck) = metasel::Checkpoint::from_json(text) {
        let _ = ck.params();
    }
});
