mod evaluate;
mod extract;
mod report;
mod select;
mod sweep;
mod synth;
mod train;

use std::path::Path;

use anyhow::{Context, Result};

pub use evaluate::cmd_evaluate;
pub use extract::cmd_extract;
pub use report::cmd_report;
pub use select::cmd_select;
pub use sweep::cmd_sweep;
pub use synth::cmd_synth;
pub use train::cmd_train;

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}
