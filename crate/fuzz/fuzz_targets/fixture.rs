#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel_extract::{AttributeProvider, FixtureProvider, GpsFix};

fuzz_target!(|text: &str| {
    if let Ok(p) = FixtureProvider::from_json(text) {
        let fix = GpsFix::new(37.7749, -122.4194, 0.0).unwrap();
        let _ = p.lookup(&fix, 25.0);
    }
});
