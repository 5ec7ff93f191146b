#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = metasel_extract::parse_traces_ndjson(text);
});
