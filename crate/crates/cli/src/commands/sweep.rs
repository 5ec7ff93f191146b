use anyhow::{bail, Context, Result};
use metasel::synth::{blend_toward_original, random_expected};
use metasel::{aggregate_distribution, DistributionTable};
use serde_json::json;

use super::{pretty, write};
use crate::config::{RunConfig, TargetMode};
use crate::exit::ExitKind;
use crate::pipeline::{sweep_cells, Target};
use crate::tables::{summarize_sweep, sweep_cells_csv, sweep_csv};

/// Writes one JSON file per cell under `sweep/cells/`, then the merged
/// `sweep_cells.csv` and the per-ρ `sweep.csv` (mean, p30, p70 of S_c and
/// S_d). Fails with exit code 3 only if every cell failed.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let sec = cfg.sweep.as_ref().context("config has no \"sweep\" section")?;
    if sec.rho_list.is_empty() {
        bail!("sweep needs at least one keep ratio");
    }
    if let Some(r) = sec.rho_list.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        bail!("keep ratio {r} outside (0, 1]");
    }
    let schema = cfg.load_schema()?;
    let corpus = cfg.load_corpus(&schema)?;
    let seed = cfg.seed()?;
    let mut targets = Vec::new();
    for p in &sec.expected_list {
        targets.push(Target {
            label: p.display().to_string(),
            table: cfg.load_expected_file(p, &schema)?,
        });
    }
    for j in 0..sec.random_targets as u64 {
        targets.push(Target {
            label: format!("random-{}", seed + j),
            table: random_expected(&schema, seed + j),
        });
    }
    if targets.is_empty() {
        bail!("sweep needs at least one target: set expected_list or random_targets");
    }
    let original = aggregate_distribution(&corpus, &schema)?;
    let mode = sec.target_mode;
    let target_for = move |t: &DistributionTable, rho: f64| -> Result<DistributionTable> {
        Ok(match mode {
            TargetMode::Fixed => t.clone(),
            TargetMode::TowardOriginal => blend_toward_original(t, &original, rho)?,
        })
    };
    let net = cfg.net_config(schema.cell_count())?;
    let cells = sweep_cells(
        &corpus,
        &schema,
        &sec.rho_list,
        &targets,
        &target_for,
        &net,
        &cfg.train_config(cfg.keep_ratio)?,
        &cfg.selector_config(cfg.keep_ratio)?,
    );

    let out = cfg.out_dir();
    for (k, c) in cells.iter().enumerate() {
        let (ri, ti) = (k / targets.len(), k % targets.len());
        let doc = json!({ "rho": c.rho, "target": c.target, "s_c": c.s_c, "s_d": c.s_d, "error": c.error });
        write(&out.join("sweep").join("cells").join(format!("cell-{ri:03}-{ti:03}.json")), pretty(&doc))?;
    }
    write(&out.join("sweep_cells.csv"), sweep_cells_csv(&cells))?;
    write(&out.join("sweep.csv"), sweep_csv(&summarize_sweep(&sec.rho_list, &cells)))?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    if failed == cells.len() {
        let first = cells[0].error.clone().unwrap_or_default();
        return Err(anyhow::anyhow!("every sweep cell failed; first error: {first}").context(ExitKind::Training));
    }
    if failed > 0 {
        tracing::warn!(failed, total = cells.len(), "some sweep cells failed");
    }
    Ok(())
}
