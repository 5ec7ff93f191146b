//! Ranked selection with cosine-similarity filtering.
//!
//! Candidates are visited in descending score order; a candidate is admitted
//! only when its ratio vector has cosine similarity below `ε` with every
//! sample admitted so far. When a full pass leaves the quota unmet, `ε` is
//! relaxed and another pass runs over the remaining candidates. After
//! `max_passes` passes (or once `ε` reaches 1) the quota is filled in rank
//! order, so exactly `⌈ρ·n⌉` samples are always returned.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::distribution::{aggregate_refs, DistributionTable};
use crate::error::{Error, Result};
use crate::metrics::{cosine_similarity, metric_report, MetricReport};
use crate::sample::{phi_sample, SampleMetadata};
use crate::schema::MetadataSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// `ε ← 1 − η(1 − ε)`: the filter loosens every pass.
    #[default]
    TowardOne,
    /// `ε ← ε·η`: shrinks ε, so the filter gets stricter every pass.
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub keep_ratio: f64,
    pub epsilon0: f64,
    pub eta: f64,
    pub relaxation: Relaxation,
    pub max_passes: usize,
    pub similarity_filter: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            keep_ratio: 0.5,
            epsilon0: 0.9,
            eta: 0.85,
            relaxation: Relaxation::TowardOne,
            max_passes: 64,
            similarity_filter: true,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        check_keep_ratio(self.keep_ratio)?;
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon0 {} outside (0, 1)", self.epsilon0)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta {} outside (0, 1)", self.eta)));
        }
        Ok(())
    }

    fn relax(&self, eps: f64) -> f64 {
        match self.relaxation {
            Relaxation::TowardOne => 1.0 - self.eta * (1.0 - eps),
            Relaxation::Multiplicative => eps * self.eta,
        }
    }
}

pub(crate) fn check_keep_ratio(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("keep ratio {rho} outside (0, 1]")))
    }
}

/// `⌈ρ·n⌉`, robust to products like `0.3 * 10 = 3.0000000000000004`.
pub fn selection_quota(keep_ratio: f64, n: usize) -> usize {
    let exact = keep_ratio * n as f64;
    let rounded = exact.round();
    let q = if (exact - rounded).abs() <= 1e-9 * exact.max(1.0) {
        rounded
    } else {
        exact.ceil()
    };
    (q as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub epsilon: f64,
    pub admitted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: String,
    /// In admission order.
    pub selected_ids: Vec<String>,
    pub selected_indices: Vec<usize>,
    pub n: usize,
    pub quota: usize,
    pub keep_ratio: f64,
    pub distribution: DistributionTable,
    pub report: MetricReport,
    pub audit: Vec<PassRecord>,
    /// Samples added by the rank-order fallback after the filter passes.
    pub fallback_admitted: usize,
}

impl SelectionResult {
    pub fn epsilon_trace(&self) -> Vec<f64> {
        self.audit.iter().map(|p| p.epsilon).collect()
    }

    /// Manifest document: selected ids, sizes, metrics and the achieved
    /// distribution keyed by cell.
    pub fn manifest(&self, schema: &MetadataSchema) -> Value {
        let mut doc = Map::new();
        doc.insert("method".into(), Value::from(self.method.clone()));
        doc.insert("selected_ids".into(), Value::from(self.selected_ids.clone()));
        doc.insert("n".into(), Value::from(self.n));
        doc.insert("N_s".into(), Value::from(self.quota));
        doc.insert("rho".into(), Value::from(self.keep_ratio));
        doc.insert("epsilon_trace".into(), Value::from(self.epsilon_trace()));
        doc.insert("audit".into(), serde_json::to_value(&self.audit).expect("audit serializes"));
        doc.insert("fallback_admitted".into(), Value::from(self.fallback_admitted));
        doc.insert("s_c".into(), Value::from(self.report.s_c));
        doc.insert("s_d".into(), Value::from(self.report.s_d));
        doc.insert("distribution".into(), Value::Object(self.distribution.to_cell_map(schema)));
        Value::Object(doc)
    }

    pub fn manifest_json(&self, schema: &MetadataSchema) -> String {
        serde_json::to_string_pretty(&self.manifest(schema)).expect("manifest serializes")
    }
}

/// The parts of a manifest needed to re-evaluate a selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub method: String,
    pub selected_ids: Vec<String>,
    pub n: usize,
    #[serde(rename = "N_s")]
    pub quota: usize,
    pub rho: f64,
    #[serde(default)]
    pub epsilon_trace: Vec<f64>,
    pub s_c: f64,
    pub s_d: f64,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.selected_ids.len() != m.quota {
            return Err(Error::InvalidConfig(format!(
                "manifest lists {} ids but N_s = {}",
                m.selected_ids.len(),
                m.quota
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = m.selected_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidConfig(format!("manifest repeats id {dup:?}")));
        }
        Ok(m)
    }
}

/// Descending by score, ties by ascending id.
pub fn rank(scores: &[(String, f64)]) -> Result<Vec<String>> {
    let ids: Vec<&str> = scores.iter().map(|(id, _)| id.as_str()).collect();
    let values: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    Ok(rank_indices(&ids, &values)?
        .into_iter()
        .map(|i| scores[i].0.clone())
        .collect())
}

pub(crate) fn rank_indices(ids: &[&str], scores: &[f64]) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Numeric(format!("NaN score for {:?}", ids[i])));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(ids[b])));
    Ok(order)
}

/// Unit-normalised copies of the ratio vectors; all-zero vectors stay zero
/// and so have similarity 0 with everything.
fn unit_vectors(corpus: &[SampleMetadata], schema: &MetadataSchema) -> Result<Vec<Vec<f64>>> {
    corpus
        .iter()
        .map(|s| {
            let mut v = phi_sample(s, schema)?.0;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            Ok(v)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    method: &str,
    corpus: &[SampleMetadata],
    indices: Vec<usize>,
    keep_ratio: f64,
    e: &DistributionTable,
    schema: &MetadataSchema,
    audit: Vec<PassRecord>,
    fallback_admitted: usize,
) -> Result<SelectionResult> {
    let distribution = aggregate_refs(indices.iter().map(|&i| &corpus[i]), schema)?;
    let report = metric_report(&distribution, e, schema)?;
    Ok(SelectionResult {
        method: method.into(),
        selected_ids: indices.iter().map(|&i| corpus[i].sample_id().to_string()).collect(),
        quota: indices.len(),
        selected_indices: indices,
        n: corpus.len(),
        keep_ratio,
        distribution,
        report,
        audit,
        fallback_admitted,
    })
}

pub fn select(
    corpus: &[SampleMetadata],
    scores: &[f64],
    e: &DistributionTable,
    config: &SelectorConfig,
    schema: &MetadataSchema,
) -> Result<SelectionResult> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if scores.len() != corpus.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} samples",
            scores.len(),
            corpus.len()
        )));
    }
    let ids: Vec<&str> = corpus.iter().map(|s| s.sample_id()).collect();
    let order = rank_indices(&ids, scores)?;
    let quota = selection_quota(config.keep_ratio, corpus.len());

    if !config.similarity_filter {
        let chosen = order[..quota].to_vec();
        return finish("ranked", corpus, chosen, config.keep_ratio, e, schema, Vec::new(), 0);
    }

    let units = unit_vectors(corpus, schema)?;
    let m = schema.cell_count();
    // admitted unit vectors, contiguous for the inner similarity loop
    let mut admitted_units: Vec<f64> = Vec::with_capacity(quota * m);
    let mut chosen: Vec<usize> = Vec::with_capacity(quota);
    let mut remaining = order;
    let mut audit = Vec::new();
    let mut eps = config.epsilon0;
    let mut fallback_admitted = 0;

    while chosen.len() < quota {
        if eps >= 1.0 - 1e-9 || audit.len() >= config.max_passes {
            let need = quota - chosen.len();
            chosen.extend_from_slice(&remaining[..need]);
            fallback_admitted = need;
            break;
        }
        let mut admitted = 0;
        let mut kept = Vec::with_capacity(remaining.len());
        for &cand in &remaining {
            if chosen.len() == quota {
                kept.push(cand);
                continue;
            }
            let u = &units[cand];
            let blocked = admitted_units
                .chunks_exact(m)
                .any(|w| w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() >= eps);
            if blocked {
                kept.push(cand);
            } else {
                admitted_units.extend_from_slice(u);
                chosen.push(cand);
                admitted += 1;
            }
        }
        remaining = kept;
        audit.push(PassRecord {
            pass: audit.len() + 1,
            epsilon: eps,
            admitted,
        });
        if chosen.len() < quota {
            eps = config.relax(eps);
        }
    }
    finish("filtered", corpus, chosen, config.keep_ratio, e, schema, audit, fallback_admitted)
}

/// Cosine similarity matrix between ratio vectors. With more than
/// `sample_cap` vectors a seeded subset is used; rows keep input order.
/// Returns the chosen input positions alongside the matrix.
pub fn pairwise_similarity_matrix<V: AsRef<[f64]>>(
    vectors: &[V],
    sample_cap: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    if vectors.len() < 2 || sample_cap < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: vectors.len().min(sample_cap),
        });
    }
    let picks: Vec<usize> = if vectors.len() > sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = index::sample(&mut rng, vectors.len(), sample_cap).into_vec();
        p.sort_unstable();
        p
    } else {
        (0..vectors.len()).collect()
    };
    let k = picks.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let s = cosine_similarity(vectors[picks[a]].as_ref(), vectors[picks[b]].as_ref())?;
            matrix[a][b] = s;
            matrix[b][a] = s;
        }
    }
    Ok((picks, matrix))
}

/// CSV with a header row of ids and one labelled row per id.
pub fn similarity_matrix_csv(ids: &[&str], matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("id");
    for id in ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(matrix) {
        out.push_str(id);
        for v in row {
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    out
}
