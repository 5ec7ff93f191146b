use anyhow::{Context, Result};
use metasel::sample::write_metadata_ndjson;
use metasel::synth::random_expected;
use metasel::{generate_synthetic, SynthProfile};

use super::write;
use crate::config::{read, RunConfig};

/// Writes `metadata.ndjson`, the `profile.json` used, and a seeded random
/// `expected.json` target.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let sec = cfg.synth.as_ref().context("config has no \"synth\" section")?;
    let schema = cfg.load_schema()?;
    let seed = cfg.seed()?;
    let profile = match &sec.profile {
        Some(p) => {
            let path = cfg.existing(p, "synthetic profile")?;
            SynthProfile::from_json(&read(&path)?).with_context(|| format!("profile {}", path.display()))?
        }
        None => SynthProfile::random(&schema, sec.components, sec.concentration, seed),
    };
    let corpus = generate_synthetic(sec.n, &schema, &profile)?;
    let out = cfg.out_dir();
    write(&out.join("metadata.ndjson"), write_metadata_ndjson(&corpus, &schema))?;
    write(&out.join("profile.json"), profile.to_json() + "\n")?;
    write(&out.join("expected.json"), random_expected(&schema, seed).to_json(&schema) + "\n")?;
    Ok(())
}
