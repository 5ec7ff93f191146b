#![no_main]

use libfuzzer_sys::fuzz_target;

use std::path::Path;

fuzz_target!(|text: &str| {
    let _ = metasel_cli::RunConfig::from_json(text, Path::new("."));
});
