use anyhow::{Context, Result};
use metasel::sample::write_metadata_ndjson;
use metasel_extract::{
    extract_corpus, parse_traces_ndjson, CachedProvider, Error as ExtractError, ExtractionReport, FixtureProvider,
    OverpassProvider,
};
use serde_json::json;

use super::{pretty, write};
use crate::config::{read, RunConfig};
use crate::exit::ExitKind;

/// Writes `metadata.ndjson` and `extraction_report.json`. Zero successes
/// still writes the report, then fails with exit code 2.
pub fn cmd_extract(cfg: &RunConfig) -> Result<()> {
    let sec = cfg.extract.as_ref().context("config has no \"extract\" section")?;
    let schema = cfg.load_schema()?;
    let traces_path = cfg.existing(&sec.traces, "trace file")?;
    let traces = parse_traces_ndjson(&read(&traces_path)?).with_context(|| format!("traces {}", traces_path.display()))?;
    let out = cfg.out_dir();

    let (provider, result) = match &sec.fixture {
        Some(f) => {
            let path = cfg.existing(f, "way fixture")?;
            let p = FixtureProvider::from_json(&read(&path)?).with_context(|| format!("fixture {}", path.display()))?;
            ("fixture", extract_corpus(&traces, &p, &schema, &sec.options))
        }
        None => {
            let mut oc = sec.overpass.clone();
            oc.apply_env(|k| std::env::var(k).ok())?;
            let p = CachedProvider::new(OverpassProvider::new(oc)?);
            let cache = sec.cache.as_ref().map(|c| cfg.path(c));
            if let Some(c) = &cache {
                p.load(c)?;
            }
            let r = extract_corpus(&traces, &p, &schema, &sec.options);
            if let Some(c) = &cache {
                p.save(c)?;
            }
            ("overpass", r)
        }
    };

    let (corpus, report, status) = match result {
        Ok((corpus, report)) => (Some(corpus), report, "ok"),
        Err(ExtractError::NoSuccesses(report)) => {
            let unavailable = report.failures.iter().any(|f| f.reason.starts_with("provider unavailable"));
            (None, *report, if unavailable { "provider unavailable" } else { "no successes" })
        }
        Err(e) => return Err(e.into()),
    };
    write(&out.join("extraction_report.json"), pretty(&report_json(provider, status, &report)))?;
    match corpus {
        Some(corpus) => {
            write(&out.join("metadata.ndjson"), write_metadata_ndjson(&corpus, &schema))?;
            tracing::info!(successes = report.successes, failures = report.failures.len(), "extraction done");
            Ok(())
        }
        None => Err(anyhow::anyhow!("no trace was extracted ({status})").context(ExitKind::ExtractionEmpty)),
    }
}

fn report_json(provider: &str, status: &str, r: &ExtractionReport) -> serde_json::Value {
    json!({
        "provider": provider,
        "status": status,
        "successes": r.successes,
        "total_seconds": r.total_seconds,
        "failures": r.failures,
    })
}
