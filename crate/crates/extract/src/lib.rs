//! Turns GPS traces into per-sample metadata by looking up the road under
//! each fix and accumulating how long each road attribute was active.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod corpus;
pub mod geo;
pub mod overpass;
pub mod provider;
pub mod types;

pub use corpus::{accumulate_tags, extract_corpus, ExtractOptions, ExtractionFailure, ExtractionReport};
pub use error::{Error, Result};
pub use overpass::{OverpassConfig, OverpassProvider};
pub use provider::{fetch_way_attributes, AttributeProvider, CachedProvider, FixtureProvider, FixtureWay};
pub use types::{parse_traces_ndjson, GpsFix, Trace, WayAttributes, WayClass};
