//! Reference selectors: exhaustive search on tiny corpora, uniform random
//! selection, and an entropy/tag-count surrogate for diversity-driven
//! curation.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionTable;
use crate::error::{Error, Result};
use crate::sample::{phi_sample, SampleMetadata};
use crate::schema::MetadataSchema;
use crate::selector::{check_keep_ratio, finish, rank_indices, selection_quota, SelectionResult};
use crate::trainer::{loss, MetricChoice};

/// Largest corpus the exhaustive search accepts; C(20, 10) ≈ 1.8e5 subsets.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub ids: Vec<String>,
    #[serde(skip)]
    pub indices: Vec<usize>,
    pub score: f64,
    pub enumerated_count: u64,
}

/// `1 − loss`: S_c, S_d or their blend.
pub fn selection_score(
    a: &DistributionTable,
    e: &DistributionTable,
    metric: MetricChoice,
    schema: &MetadataSchema,
) -> Result<f64> {
    Ok(1.0 - loss(a, e, metric, schema)?)
}

struct Enumerator<'a> {
    tags: &'a [Vec<f64>],
    durations: &'a [f64],
    e: &'a DistributionTable,
    metric: MetricChoice,
    schema: &'a MetadataSchema,
    k: usize,
}

#[derive(Clone)]
struct Best {
    score: f64,
    combo: Vec<usize>,
    count: u64,
}

impl Enumerator<'_> {
    fn score(&self, sums: &[f64], total: f64) -> Result<f64> {
        let a = DistributionTable::new(sums.iter().map(|v| (v / total).clamp(0.0, 1.0)).collect());
        selection_score(&a, self.e, self.metric, self.schema)
    }

    /// Depth-first enumeration in lexicographic position order; only a
    /// strictly better score replaces the incumbent, so the earliest
    /// combination wins ties.
    fn dfs(&self, start: usize, combo: &mut Vec<usize>, sums: &mut Vec<f64>, total: f64, best: &mut Best) -> Result<()> {
        if combo.len() == self.k {
            best.count += 1;
            let s = self.score(sums, total)?;
            if s > best.score {
                best.score = s;
                best.combo = combo.clone();
            }
            return Ok(());
        }
        let n = self.tags.len();
        let left = self.k - combo.len();
        for i in start..=(n - left) {
            combo.push(i);
            for (acc, t) in sums.iter_mut().zip(&self.tags[i]) {
                *acc += t;
            }
            self.dfs(i + 1, combo, sums, total + self.durations[i], best)?;
            for (acc, t) in sums.iter_mut().zip(&self.tags[i]) {
                *acc -= t;
            }
            combo.pop();
        }
        Ok(())
    }
}

/// Exhaustive search over every subset of size `⌈ρ·n⌉`, maximising
/// `selection_score`. Ties go to the lexicographically smallest id list.
pub fn brute_force_best_subset(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    keep_ratio: f64,
    metric: MetricChoice,
    schema: &MetadataSchema,
) -> Result<OracleResult> {
    check_keep_ratio(keep_ratio)?;
    let n = corpus.len();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    if n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            n,
            max: ENUMERATION_LIMIT,
        });
    }
    for s in corpus {
        phi_sample(s, schema)?;
    }
    let k = selection_quota(keep_ratio, n);
    // enumerate over positions sorted by id so position order is id order
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by(|&a, &b| corpus[a].sample_id().cmp(corpus[b].sample_id()));
    let tags: Vec<Vec<f64>> = by_id.iter().map(|&i| corpus[i].tag_durations().to_vec()).collect();
    let durations: Vec<f64> = by_id.iter().map(|&i| corpus[i].total_duration_s()).collect();
    let en = Enumerator {
        tags: &tags,
        durations: &durations,
        e,
        metric,
        schema,
        k,
    };
    // one task per first element; results reduced in first-element order
    let parts: Vec<Result<Best>> = (0..=(n - k))
        .into_par_iter()
        .map(|first| {
            let mut best = Best {
                score: f64::NEG_INFINITY,
                combo: Vec::new(),
                count: 0,
            };
            let mut combo = vec![first];
            let mut sums = tags[first].clone();
            en.dfs(first + 1, &mut combo, &mut sums, durations[first], &mut best)?;
            Ok(best)
        })
        .collect();
    let mut best = Best {
        score: f64::NEG_INFINITY,
        combo: Vec::new(),
        count: 0,
    };
    for part in parts {
        let part = part?;
        best.count += part.count;
        if part.score > best.score {
            best.score = part.score;
            best.combo = part.combo;
        }
    }
    let indices: Vec<usize> = best.combo.iter().map(|&p| by_id[p]).collect();
    Ok(OracleResult {
        ids: indices.iter().map(|&i| corpus[i].sample_id().to_string()).collect(),
        indices,
        score: best.score,
        enumerated_count: best.count,
    })
}

/// Uniform sample of `⌈ρ·n⌉` ids without replacement.
pub fn random_select(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    keep_ratio: f64,
    seed: u64,
    schema: &MetadataSchema,
) -> Result<SelectionResult> {
    check_keep_ratio(keep_ratio)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let quota = selection_quota(keep_ratio, corpus.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = index::sample(&mut rng, corpus.len(), quota).into_vec();
    finish("random", corpus, chosen, keep_ratio, e, schema, Vec::new(), 0)
}

/// Diversity/complexity surrogate score: Shannon entropy (nats) of the
/// normalised ratio vector plus the fraction of nonzero cells.
pub fn dc_surrogate_score(ratios: &[f64]) -> f64 {
    let m = ratios.len();
    let total: f64 = ratios.iter().sum();
    if total <= 0.0 || m == 0 {
        return 0.0;
    }
    let entropy: f64 = ratios
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| {
            let p = r / total;
            -p * p.ln()
        })
        .sum();
    let nonzero = ratios.iter().filter(|&&r| r > 0.0).count();
    entropy + nonzero as f64 / m as f64
}

/// Top `⌈ρ·n⌉` samples by [`dc_surrogate_score`], ties by id. No similarity
/// filter and no use of the expected distribution beyond reporting.
pub fn dc_surrogate_select(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    keep_ratio: f64,
    schema: &MetadataSchema,
) -> Result<SelectionResult> {
    check_keep_ratio(keep_ratio)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores: Vec<f64> = corpus
        .iter()
        .map(|s| phi_sample(s, schema).map(|r| dc_surrogate_score(&r.0)))
        .collect::<Result<_>>()?;
    let ids: Vec<&str> = corpus.iter().map(|s| s.sample_id()).collect();
    let order = rank_indices(&ids, &scores)?;
    let quota = selection_quota(keep_ratio, corpus.len());
    finish("dc_surrogate", corpus, order[..quota].to_vec(), keep_ratio, e, schema, Vec::new(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::aggregate_distribution;
    use crate::schema::DomainSpec;

    fn schema() -> MetadataSchema {
        MetadataSchema::new(vec![DomainSpec::new("w", ["x", "y"]), DomainSpec::new("f", ["z"])]).unwrap()
    }

    fn s(id: &str, tags: [f64; 3]) -> SampleMetadata {
        SampleMetadata::new(id, 10.0, tags.to_vec()).unwrap()
    }

    #[test]
    fn single_sample_oracle() {
        let sc = schema();
        let c = vec![s("only", [3.0, 4.0, 0.0])];
        let e = DistributionTable::new(vec![0.5, 0.5, 0.0]);
        let r = brute_force_best_subset(&c, &e, 1.0, MetricChoice::Category, &sc).unwrap();
        assert_eq!(r.ids, ["only"]);
        let a = aggregate_distribution(&c, &sc).unwrap();
        assert_eq!(r.score, selection_score(&a, &e, MetricChoice::Category, &sc).unwrap());
        assert_eq!(r.enumerated_count, 1);
    }

    #[test]
    fn finds_exact_pair() {
        let sc = schema();
        // a and b together give (0.5, 0.25, 0.1)
        let c = vec![
            s("a", [10.0, 0.0, 2.0]),
            s("b", [0.0, 5.0, 0.0]),
            s("c", [0.0, 10.0, 10.0]),
            s("d", [2.0, 2.0, 2.0]),
        ];
        let e = DistributionTable::new(vec![0.5, 0.25, 0.1]);
        let r = brute_force_best_subset(&c, &e, 0.5, MetricChoice::Category, &sc).unwrap();
        assert_eq!(r.ids, ["a", "b"]);
        assert!((r.score - 1.0).abs() < 1e-12);
        assert_eq!(r.enumerated_count, 6);
    }

    #[test]
    fn ties_prefer_smallest_ids() {
        let sc = schema();
        let c: Vec<_> = ["q", "c", "m", "a"].iter().map(|id| s(id, [5.0, 5.0, 0.0])).collect();
        let e = DistributionTable::new(vec![0.5, 0.5, 0.0]);
        let r = brute_force_best_subset(&c, &e, 0.5, MetricChoice::Domain, &sc).unwrap();
        assert_eq!(r.ids, ["a", "c"]);
    }

    #[test]
    fn size_limit() {
        let sc = schema();
        let c: Vec<_> = (0..21).map(|i| s(&format!("{i:02}"), [1.0, 1.0, 1.0])).collect();
        let e = DistributionTable::new(vec![0.1, 0.1, 0.1]);
        assert!(matches!(
            brute_force_best_subset(&c, &e, 0.5, MetricChoice::Category, &sc),
            Err(Error::SizeLimit { n: 21, max: 20 })
        ));
    }

    #[test]
    fn random_baseline() {
        let sc = schema();
        let c: Vec<_> = (0..10).map(|i| s(&format!("r{i}"), [i as f64, 1.0, 0.0])).collect();
        let e = DistributionTable::new(vec![0.3, 0.1, 0.0]);
        let all = random_select(&c, &e, 1.0, 3, &sc).unwrap();
        assert_eq!(all.selected_ids.len(), 10);
        let a = random_select(&c, &e, 0.33, 3, &sc).unwrap();
        assert_eq!(a.selected_ids.len(), 4);
        assert_eq!(a, random_select(&c, &e, 0.33, 3, &sc).unwrap());
        assert!(random_select(&[], &e, 0.5, 3, &sc).is_err());
    }

    #[test]
    fn entropy_prefers_spread() {
        assert!(dc_surrogate_score(&[0.3, 0.3, 0.3]) > dc_surrogate_score(&[0.9, 0.0, 0.0]));
        assert_eq!(dc_surrogate_score(&[0.0, 0.0]), 0.0);
        // single nonzero cell: zero entropy, 1/3 coverage
        assert!((dc_surrogate_score(&[0.9, 0.0, 0.0]) - 1.0 / 3.0).abs() < 1e-12);
        let uniform = 3.0f64.ln() + 1.0;
        assert!((dc_surrogate_score(&[0.2, 0.2, 0.2]) - uniform).abs() < 1e-12);
    }

    #[test]
    fn dc_ranks_and_breaks_ties_by_id() {
        let sc = schema();
        let c = vec![s("peaky", [9.0, 0.0, 0.0]), s("spread", [3.0, 3.0, 3.0])];
        let e = DistributionTable::new(vec![0.3, 0.1, 0.1]);
        let r = dc_surrogate_select(&c, &e, 0.5, &sc).unwrap();
        assert_eq!(r.selected_ids, ["spread"]);
        let same: Vec<_> = ["d", "b", "c", "a"].iter().map(|id| s(id, [1.0, 2.0, 3.0])).collect();
        let r = dc_surrogate_select(&same, &e, 0.5, &sc).unwrap();
        assert_eq!(r.selected_ids, ["a", "b"]);
    }
}
