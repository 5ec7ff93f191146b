#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel::sample::write_metadata_ndjson;
use metasel::{parse_metadata_ndjson, MetadataSchema};

fuzz_target!(|text: &str| {
    let schema = MetadataSchema::driving();
    if let Ok(corpus) = parse_metadata_ndjson(text, &schema) {
        let again = parse_metadata_ndjson(&write_metadata_ndjson(&corpus, &schema), &schema).unwrap();
        assert_eq!(again.len(), corpus.len());
    }
});
