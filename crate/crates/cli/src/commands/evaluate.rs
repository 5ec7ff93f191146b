use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use metasel::{aggregate_distribution, avg_pairwise_mae, metric_report, phi_corpus, Manifest, SampleMetadata};
use serde::Serialize;

use super::{pretty, write};
use crate::config::{read, RunConfig};
use crate::tables::quote;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub manifest: String,
    pub method: String,
    pub n: usize,
    #[serde(rename = "N_s")]
    pub quota: usize,
    pub rho: f64,
    pub s_c: f64,
    pub s_d: f64,
    /// Absent for single-sample selections.
    pub avg_pairwise_mae: Option<f64>,
}

/// Re-scores every listed manifest against the configured corpus and
/// target. Writes `evaluation.csv` and `evaluation.json`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let sec = cfg.evaluate.as_ref().context("config has no \"evaluate\" section")?;
    if sec.manifests.is_empty() {
        bail!("evaluate needs at least one manifest");
    }
    let inputs = cfg.load_inputs()?;
    let seed = cfg.seed()?;
    let ratios = phi_corpus(&inputs.corpus, &inputs.schema)?;
    let position: HashMap<&str, usize> =
        inputs.corpus.iter().enumerate().map(|(i, s)| (s.sample_id(), i)).collect();

    let mut rows = Vec::new();
    for raw in &sec.manifests {
        let path = cfg.existing(raw, "manifest")?;
        let label = raw.display().to_string();
        let m = Manifest::from_json(&read(&path)?).with_context(|| format!("manifest {label}"))?;
        if m.n != inputs.corpus.len() {
            bail!("manifest {label} was made from {} samples, the corpus has {}", m.n, inputs.corpus.len());
        }
        let unknown: Vec<&str> = m.selected_ids.iter().filter(|id| !position.contains_key(id.as_str())).map(String::as_str).collect();
        if !unknown.is_empty() {
            bail!("manifest {label} lists ids missing from the corpus: {}", unknown.join(", "));
        }
        let idx: Vec<usize> = m.selected_ids.iter().map(|id| position[id.as_str()]).collect();
        let subset: Vec<SampleMetadata> = idx.iter().map(|&i| inputs.corpus[i].clone()).collect();
        let report = metric_report(&aggregate_distribution(&subset, &inputs.schema)?, &inputs.expected, &inputs.schema)?;
        let vectors: Vec<&[f64]> = idx.iter().map(|&i| ratios[i].as_slice()).collect();
        let mae = if vectors.len() < 2 { None } else { Some(avg_pairwise_mae(&vectors, sec.pair_cap, seed)?) };
        rows.push(EvaluationRow {
            manifest: label,
            method: m.method,
            n: m.n,
            quota: m.quota,
            rho: m.rho,
            s_c: report.s_c,
            s_d: report.s_d,
            avg_pairwise_mae: mae,
        });
    }
    let out = cfg.out_dir();
    write(&out.join("evaluation.csv"), evaluation_csv(&rows))?;
    write(&out.join("evaluation.json"), pretty(&serde_json::to_value(&rows)?))?;
    Ok(())
}

pub fn evaluation_csv(rows: &[EvaluationRow]) -> String {
    let mut out = String::from("manifest,method,n,N_s,rho,s_c,s_d,avg_pairwise_mae\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            quote(&r.manifest),
            quote(&r.method),
            r.n,
            r.quota,
            r.rho,
            r.s_c,
            r.s_d,
            r.avg_pairwise_mae.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}
