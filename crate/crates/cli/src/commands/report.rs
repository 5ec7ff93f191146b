use anyhow::Result;
use metasel::selector::{pairwise_similarity_matrix, similarity_matrix_csv};
use metasel::{aggregate_distribution, avg_pairwise_mae, metric_report, phi_corpus, SelectionResult};
use serde_json::{json, Map, Value};

use super::select::{run_method, write_selection};
use super::{pretty, write};
use crate::config::RunConfig;
use crate::pipeline::Method;
use crate::tables::{distribution_csv, metric_rows};

const METHODS: [Method; 3] = [Method::Trained, Method::Random, Method::DcSurrogate];

/// Side-by-side comparison of the trained selector and both baselines at
/// the configured keep ratio. Writes per-method manifests, metrics and
/// similarity matrices under `report/`, plus `report/comparison.csv`
/// (cell, Original, E, one column per method, then S_c and S_d rows) and
/// `report/report.json`.
pub fn cmd_report(cfg: &RunConfig, reuse_checkpoint: bool) -> Result<()> {
    let inputs = cfg.load_inputs()?;
    let seed = cfg.seed()?;
    let dir = cfg.out_dir().join("report");
    let ratios = phi_corpus(&inputs.corpus, &inputs.schema)?;

    let mut results: Vec<(Method, SelectionResult)> = Vec::new();
    let mut summary = Map::new();
    let mut hash = None;
    for method in METHODS {
        let (r, h) = run_method(cfg, &inputs, method, reuse_checkpoint)?;
        hash = hash.or(h);
        let prefix = format!("{}_", method.name());
        write_selection(&dir, &prefix, &inputs, &r, None)?;
        let vectors: Vec<&[f64]> = r.selected_indices.iter().map(|&i| ratios[i].as_slice()).collect();
        let mae = if vectors.len() >= 2 { Some(avg_pairwise_mae(&vectors, cfg.report.pair_cap, seed)?) } else { None };
        if vectors.len() >= 2 && cfg.report.similarity_cap >= 2 {
            let (picks, matrix) = pairwise_similarity_matrix(&vectors, cfg.report.similarity_cap, seed)?;
            let ids: Vec<&str> = picks.iter().map(|&p| r.selected_ids[p].as_str()).collect();
            write(&dir.join(format!("{prefix}similarity.csv")), similarity_matrix_csv(&ids, &matrix))?;
        }
        summary.insert(
            method.name().into(),
            json!({ "s_c": r.report.s_c, "s_d": r.report.s_d, "N_s": r.quota, "avg_pairwise_mae": mae }),
        );
        results.push((method, r));
    }

    let original = aggregate_distribution(&inputs.corpus, &inputs.schema)?;
    let columns: Vec<(&str, &_)> = results.iter().map(|(m, r)| (m.name(), &r.distribution)).collect();
    let mut csv = distribution_csv(&inputs.schema, &original, &inputs.expected, &columns);
    let original_report = metric_report(&original, &inputs.expected, &inputs.schema)?;
    let reports: Vec<&_> = results.iter().map(|(_, r)| &r.report).collect();
    csv.push_str(&metric_rows(&original_report, &reports));
    write(&dir.join("comparison.csv"), csv)?;

    let doc = json!({
        "config_hash": hash.map(Value::from).unwrap_or(Value::Null),
        "rho": cfg.keep_ratio,
        "n": inputs.corpus.len(),
        "original": { "s_c": original_report.s_c, "s_d": original_report.s_d },
        "methods": summary,
    });
    write(&dir.join("report.json"), pretty(&doc))
}
