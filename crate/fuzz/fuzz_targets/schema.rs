#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(schema) = metasel::MetadataSchema::from_json(text) {
        for j in 0..schema.cell_count() {
            assert_eq!(schema.parse_key(&schema.cell_key(j)).unwrap(), j);
        }
    }
});
