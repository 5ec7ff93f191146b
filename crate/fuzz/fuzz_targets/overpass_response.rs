#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel_extract::overpass::nearest_way_attributes;
use metasel_extract::GpsFix;

fuzz_target!(|text: &str| {
    let fix = GpsFix::new(37.7749, -122.4194, 0.0).unwrap();
    let _ = nearest_way_attributes(text, &fix);
});
