//! Train → score → select, shared by the select, report and sweep verbs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use metasel::sample::write_metadata_ndjson;
use metasel::{
    dc_surrogate_select, hash_hex, phi_corpus, random_select, score_batch, select, train, Checkpoint, DistributionTable,
    MetadataSchema, NetConfig, NetParams, SampleMetadata, SelectionResult, SelectorConfig, TrainConfig, TrainLog,
};
use serde_json::{Map, Value};

use crate::exit::{is_training_failure, ExitKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Trained,
    Random,
    DcSurrogate,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Trained => "trained",
            Method::Random => "random",
            Method::DcSurrogate => "dc_surrogate",
        }
    }
}

pub fn train_model(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    schema: &MetadataSchema,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(NetParams, TrainLog)> {
    train(corpus, e, schema, net, cfg).map_err(|err| {
        let training = is_training_failure(&err);
        let err = anyhow::Error::new(err);
        if training {
            err.context(ExitKind::Training)
        } else {
            err
        }
    })
}

pub fn score_corpus(params: &NetParams, corpus: &[SampleMetadata], schema: &MetadataSchema) -> Result<Vec<f64>> {
    let x = phi_corpus(corpus, schema)?;
    Ok(score_batch(params, &x)?)
}

/// What a checkpoint was trained from; reuse requires all of it to match.
pub fn checkpoint_meta(
    config_hash: &str,
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    schema: &MetadataSchema,
) -> Map<String, Value> {
    let mut meta = Map::new();
    meta.insert("config_hash".into(), config_hash.into());
    meta.insert("corpus_hash".into(), hash_hex(write_metadata_ndjson(corpus, schema).as_bytes()).into());
    meta.insert("expected_hash".into(), hash_hex(e.to_json(schema).as_bytes()).into());
    meta.insert("schema".into(), schema.fingerprint().into());
    meta
}

/// Loads a checkpoint and refuses it unless it was trained with the same
/// configuration on the same corpus, target and schema.
pub fn load_checkpoint(path: &Path, expected_meta: &Map<String, Value>, net: &NetConfig) -> Result<NetParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ck = Checkpoint::from_json(&text).with_context(|| format!("checkpoint {}", path.display()))?;
    for (key, what) in [
        ("schema", "schema"),
        ("corpus_hash", "corpus"),
        ("expected_hash", "expected distribution"),
        ("config_hash", "configuration"),
    ] {
        if ck.meta.get(key) != expected_meta.get(key) {
            bail!("checkpoint {} was trained with a different {what}", path.display());
        }
    }
    if &ck.config != net {
        bail!("checkpoint {} has a different network shape", path.display());
    }
    Ok(ck.params())
}

/// Hard selection by a baseline method.
pub fn baseline(
    method: Method,
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    keep_ratio: f64,
    seed: u64,
    schema: &MetadataSchema,
) -> Result<SelectionResult> {
    Ok(match method {
        Method::Random => random_select(corpus, e, keep_ratio, seed, schema)?,
        Method::DcSurrogate => dc_surrogate_select(corpus, e, keep_ratio, schema)?,
        Method::Trained => bail!("the trained method needs a network"),
    })
}

/// Trains a fresh network and selects with it.
pub fn train_and_select(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    schema: &MetadataSchema,
    net: &NetConfig,
    train_cfg: &TrainConfig,
    selector: &SelectorConfig,
) -> Result<SelectionResult> {
    let (params, _) = train_model(corpus, e, schema, net, train_cfg)?;
    let scores = score_corpus(&params, corpus, schema)?;
    Ok(select(corpus, &scores, e, selector, schema)?)
}

/// One sweep target: a label and its table.
pub struct Target {
    pub label: String,
    pub table: DistributionTable,
}

/// Trains and selects for every (ρ, target) pair, in parallel. Cells come
/// back in (ρ, target) order; a failing cell records its error instead of
/// stopping the sweep. `target_for` maps a listed table to the cell's target
/// at the given ρ.
#[allow(clippy::too_many_arguments)]
pub fn sweep_cells(
    corpus: &[SampleMetadata],
    schema: &MetadataSchema,
    rho_list: &[f64],
    targets: &[Target],
    target_for: &(dyn Fn(&DistributionTable, f64) -> Result<DistributionTable> + Sync),
    net: &NetConfig,
    train_cfg: &TrainConfig,
    selector: &SelectorConfig,
) -> Vec<crate::tables::SweepCell> {
    use rayon::prelude::*;
    let pairs: Vec<(f64, &Target)> = rho_list.iter().flat_map(|&r| targets.iter().map(move |t| (r, t))).collect();
    pairs
        .into_par_iter()
        .map(|(rho, target)| {
            let run = || -> Result<SelectionResult> {
                let e = target_for(&target.table, rho)?;
                let tc = TrainConfig {
                    keep_ratio: rho,
                    ..train_cfg.clone()
                };
                let sc = SelectorConfig {
                    keep_ratio: rho,
                    ..selector.clone()
                };
                train_and_select(corpus, &e, schema, net, &tc, &sc)
            };
            let (s_c, s_d, error) = match run() {
                Ok(r) => (Some(r.report.s_c), Some(r.report.s_d), None),
                Err(e) => (None, None, Some(format!("{e:#}"))),
            };
            crate::tables::SweepCell {
                rho,
                target: target.label.clone(),
                s_c,
                s_d,
                error,
            }
        })
        .collect()
}
