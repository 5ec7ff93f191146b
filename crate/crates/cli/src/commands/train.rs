use anyhow::Result;
use metasel::{Checkpoint, NetParams};

use super::write;
use crate::config::{config_hash, Inputs, RunConfig};
use crate::pipeline::{checkpoint_meta, train_model};

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let inputs = cfg.load_inputs()?;
    train_and_save(cfg, &inputs)?;
    Ok(())
}

/// Trains, then writes the checkpoint and `train_log.csv`. The log carries
/// wall-clock epoch times and is the one output that differs between runs.
pub(crate) fn train_and_save(cfg: &RunConfig, inputs: &Inputs) -> Result<NetParams> {
    let net = cfg.net_config(inputs.schema.cell_count())?;
    let tc = cfg.train_config(cfg.keep_ratio)?;
    let (params, log) = train_model(&inputs.corpus, &inputs.expected, &inputs.schema, &net, &tc)?;
    let meta = checkpoint_meta(&config_hash(&net, &tc), &inputs.corpus, &inputs.expected, &inputs.schema);
    write(&cfg.checkpoint_path(), Checkpoint::new(&net, &params, meta).to_json())?;
    write(&cfg.out_dir().join("train_log.csv"), log.to_csv())?;
    if let Some(last) = log.epochs.last() {
        tracing::info!(epochs = log.epochs.len(), loss = last.loss, s_c = last.s_c, "training done");
    }
    Ok(params)
}
