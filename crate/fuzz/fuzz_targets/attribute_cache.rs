#![no_main]

use libfuzzer_sys::fuzz_target;

use metasel_extract::{CachedProvider, FixtureProvider};

// the cache only loads from a file, so each input goes through one
fuzz_target!(|data: &[u8]| {
    let path = std::env::temp_dir().join(format!("metasel-fuzz-cache-{}.json", std::process::id()));
    std::fs::write(&path, data).unwrap();
    let cache = CachedProvider::new(FixtureProvider::from_json("[]").unwrap());
    let _ = cache.load(&path);
});
