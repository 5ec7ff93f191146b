#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel::{generate_synthetic, MetadataSchema, SynthProfile};

fuzz_target!(|text: &str| {
    if let Ok(p) = SynthProfile::from_json(text) {
        let _ = generate_synthetic(4, &MetadataSchema::driving(), &p);
    }
});
