//! Metadata-driven data selection for driving corpora.
//!
//! Samples are summarised by how long each metadata cell (road class, lane
//! count, bridge, ...) is active. A small MLP scores samples from their
//! ratio vectors and is trained so that keeping the top-ρ fraction of a
//! corpus reproduces a target distribution over those cells.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod baselines;
pub mod distribution;
pub mod metrics;
pub mod net;
pub mod sample;
pub mod schema;
pub mod selector;
pub mod synth;
pub mod trainer;

pub use baselines::{brute_force_best_subset, dc_surrogate_select, random_select, OracleResult};
pub use distribution::{aggregate_distribution, validate_expected, DistributionTable, OverlapWarning};
pub use error::{Error, Result};
pub use metrics::{avg_pairwise_mae, cosine_similarity, metric_report, score_category, score_domain, MetricReport};
pub use net::{init_params, score_batch, Checkpoint, NetConfig, NetParams};
pub use sample::{parse_metadata_ndjson, phi_corpus, phi_sample, RatioVector, SampleMetadata};
pub use schema::{DomainSpec, MetadataSchema};
pub use selector::{rank, select, selection_quota, Manifest, SelectionResult, SelectorConfig};
pub use synth::{generate_synthetic, SynthProfile};
pub use trainer::{train, MetricChoice, TrainConfig, TrainLog, Trainer};

/// Lowercase hex SHA-256, used for fingerprints and config hashes.
pub fn hash_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
