use std::collections::HashSet;

use metasel::{MetadataSchema, SampleMetadata};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provider::{fetch_way_attributes, AttributeProvider, DEFAULT_RADIUS_M};
use crate::types::{GpsFix, Trace, WayAttributes, WayClass};

/// Default cap on the time credited to one fix.
pub const DEFAULT_GAP_CAP_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub radius_m: f64,
    pub gap_cap_s: f64,
    /// Traces extracted at once; 0 means one per available thread.
    pub concurrency_limit: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            radius_m: DEFAULT_RADIUS_M,
            gap_cap_s: DEFAULT_GAP_CAP_S,
            concurrency_limit: 0,
        }
    }
}

/// Schema cells fed by each attribute. Attributes without a matching cell
/// in the schema are dropped.
#[derive(Debug, Clone)]
struct CellMap {
    class: [Option<usize>; 4],
    lanes: [Option<usize>; 6],
    flags: [Option<usize>; 6],
}

impl CellMap {
    fn new(schema: &MetadataSchema) -> Self {
        let cell = |d: &str, c: &str| schema.cell_index(d, c);
        let lane = |k: usize| {
            let name = if k == 1 { "1-lane".to_string() } else { format!("{k}-lanes") };
            cell("Number of lane", &name)
        };
        Self {
            class: [
                cell("Way type", "Highway"),
                cell("Way type", "Primary way"),
                cell("Way type", "Secondary way"),
                cell("Way type", "Link way"),
            ],
            lanes: [lane(1), lane(2), lane(3), lane(4), lane(5), lane(6)],
            flags: [
                cell("Bridge", "Bridge"),
                cell("One way", "One way"),
                cell("Toll", "Toll"),
                cell("Tunnel", "Tunnel"),
                cell("Roundabout", "Roundabout"),
                cell("Shoulder", "Shoulder"),
            ],
        }
    }

    fn cells(&self, a: &WayAttributes) -> impl Iterator<Item = usize> {
        let class = match a.way_class {
            WayClass::Motorway => self.class[0],
            WayClass::Primary => self.class[1],
            WayClass::Secondary => self.class[2],
            WayClass::Link => self.class[3],
            WayClass::Other | WayClass::None => None,
        };
        // lanes above the last bucket count as the last bucket
        let lanes = a.lanes.and_then(|k| self.lanes[(k.clamp(1, 6) - 1) as usize]);
        let on = [a.bridge, a.oneway, a.toll, a.tunnel, a.roundabout, a.shoulder];
        let flags: Vec<usize> = on.iter().zip(&self.flags).filter_map(|(&f, &c)| if f { c } else { None }).collect();
        class.into_iter().chain(lanes).chain(flags)
    }
}

fn check_trace(fixes: &[GpsFix]) -> Result<()> {
    if fixes.len() < 2 {
        return Err(Error::InsufficientTrace(fixes.len()));
    }
    for (i, f) in fixes.iter().enumerate() {
        f.validate().map_err(|e| Error::InvalidTrace(format!("fix {i}: {e}")))?;
    }
    if let Some(i) = fixes.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidTrace(format!(
            "timestamps not strictly increasing at fix {} ({} -> {})",
            i + 1,
            fixes[i].t,
            fixes[i + 1].t
        )));
    }
    Ok(())
}

/// Credits each fix but the last with `min(Δt, gap_cap_s)` of total time
/// and the same amount to every cell its way implies.
pub fn accumulate_tags(
    sample_id: &str,
    fixes: &[GpsFix],
    provider: &dyn AttributeProvider,
    schema: &MetadataSchema,
    options: &ExtractOptions,
) -> Result<SampleMetadata> {
    check_trace(fixes)?;
    if !(options.gap_cap_s > 0.0) {
        return Err(Error::Config(format!("gap cap {} s must be positive", options.gap_cap_s)));
    }
    let map = CellMap::new(schema);
    let mut tags = vec![0.0; schema.cell_count()];
    let mut total = 0.0;
    for w in fixes.windows(2) {
        let dt = (w[1].t - w[0].t).min(options.gap_cap_s);
        total += dt;
        let attrs = fetch_way_attributes(&w[0], options.radius_m, provider)?;
        for j in map.cells(&attrs) {
            tags[j] += dt;
        }
    }
    // summation order is identical for total and tags, so tags ≤ total holds exactly
    Ok(SampleMetadata::new(sample_id, total, tags)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExtractionReport {
    pub successes: usize,
    pub failures: Vec<ExtractionFailure>,
    pub total_seconds: f64,
}

/// Extracts every trace, recording failures instead of stopping. Output is
/// in input order. Fails only on duplicate ids or when nothing succeeded;
/// the latter error carries the report.
pub fn extract_corpus(
    traces: &[Trace],
    provider: &dyn AttributeProvider,
    schema: &MetadataSchema,
    options: &ExtractOptions,
) -> Result<(Vec<SampleMetadata>, ExtractionReport)> {
    let mut seen = HashSet::new();
    for t in traces {
        if !seen.insert(t.sample_id.as_str()) {
            return Err(Error::DuplicateId(t.sample_id.clone()));
        }
    }
    let run = || -> Vec<Result<SampleMetadata>> {
        traces
            .par_iter()
            .map(|t| accumulate_tags(&t.sample_id, &t.fixes, provider, schema, options))
            .collect()
    };
    let results = if options.concurrency_limit > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.concurrency_limit)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    } else {
        run()
    };
    let mut corpus = Vec::new();
    let mut report = ExtractionReport::default();
    for (trace, result) in traces.iter().zip(results) {
        match result {
            Ok(sample) => {
                report.total_seconds += sample.total_duration_s();
                corpus.push(sample);
            }
            Err(e) => {
                tracing::warn!(sample_id = %trace.sample_id, "extraction failed: {e}");
                report.failures.push(ExtractionFailure {
                    sample_id: trace.sample_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    report.successes = corpus.len();
    if corpus.is_empty() {
        return Err(Error::NoSuccesses(Box::new(report)));
    }
    Ok((corpus, report))
}
