#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel::{DistributionTable, MetadataSchema};

fuzz_target!(|text: &str| {
    let schema = MetadataSchema::driving();
    if let Ok(e) = DistributionTable::from_json(text, &schema) {
        let _ = DistributionTable::from_json(&e.to_json(&schema), &schema).unwrap();
    }
});
