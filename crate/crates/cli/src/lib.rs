//! Library side of the `metasel` command: config loading, the verbs, and
//! the CSV/JSON report writers they share.

pub mod commands;
pub mod config;
pub mod exit;
pub mod pipeline;
pub mod tables;

pub use config::RunConfig;
pub use exit::ExitKind;
