use std::path::Path;

use anyhow::Result;
use metasel::{aggregate_distribution, select, NetParams, SelectionResult};
use serde_json::Value;

use super::train::train_and_save;
use super::write;
use crate::config::{config_hash, Inputs, RunConfig};
use crate::pipeline::{baseline, checkpoint_meta, load_checkpoint, score_corpus, Method};
use crate::tables::{distribution_csv, metrics_csv};

/// Writes `manifest.json`, `metrics.csv` and `distribution.csv` (cell,
/// Original, E, Achieved) for one selection method.
pub fn cmd_select(cfg: &RunConfig, method: Method, reuse_checkpoint: bool) -> Result<()> {
    let inputs = cfg.load_inputs()?;
    let (result, hash) = run_method(cfg, &inputs, method, reuse_checkpoint)?;
    write_selection(&cfg.out_dir(), "", &inputs, &result, hash.as_deref())
}

/// Runs one method; the trained method also returns its config hash.
pub(crate) fn run_method(
    cfg: &RunConfig,
    inputs: &Inputs,
    method: Method,
    reuse_checkpoint: bool,
) -> Result<(SelectionResult, Option<String>)> {
    let rho = cfg.keep_ratio;
    if method != Method::Trained {
        let r = baseline(method, &inputs.corpus, &inputs.expected, rho, cfg.seed()?, &inputs.schema)?;
        return Ok((r, None));
    }
    let net = cfg.net_config(inputs.schema.cell_count())?;
    let hash = config_hash(&net, &cfg.train_config(rho)?);
    let params = trained_params(cfg, inputs, &hash, reuse_checkpoint)?;
    let scores = score_corpus(&params, &inputs.corpus, &inputs.schema)?;
    let result = select(&inputs.corpus, &scores, &inputs.expected, &cfg.selector_config(rho)?, &inputs.schema)?;
    Ok((result, Some(hash)))
}

fn trained_params(cfg: &RunConfig, inputs: &Inputs, hash: &str, reuse: bool) -> Result<NetParams> {
    let path = cfg.checkpoint_path();
    if reuse && path.exists() {
        let net = cfg.net_config(inputs.schema.cell_count())?;
        let meta = checkpoint_meta(hash, &inputs.corpus, &inputs.expected, &inputs.schema);
        tracing::info!("reusing checkpoint {}", path.display());
        return load_checkpoint(&path, &meta, &net);
    }
    train_and_save(cfg, inputs)
}

/// Writes `<prefix>manifest.json`, `<prefix>metrics.csv` and
/// `<prefix>distribution.csv` into `dir`.
pub(crate) fn write_selection(
    dir: &Path,
    prefix: &str,
    inputs: &Inputs,
    result: &SelectionResult,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut manifest = result.manifest(&inputs.schema);
    if let (Some(h), Value::Object(doc)) = (config_hash, &mut manifest) {
        doc.insert("config_hash".into(), h.into());
    }
    write(&dir.join(format!("{prefix}manifest.json")), super::pretty(&manifest))?;
    write(&dir.join(format!("{prefix}metrics.csv")), metrics_csv(result))?;
    let original = aggregate_distribution(&inputs.corpus, &inputs.schema)?;
    let csv = distribution_csv(&inputs.schema, &original, &inputs.expected, &[("Achieved", &result.distribution)]);
    write(&dir.join(format!("{prefix}distribution.csv")), csv)?;
    tracing::info!(method = %result.method, s_c = result.report.s_c, s_d = result.report.s_d, "selection written");
    Ok(())
}
