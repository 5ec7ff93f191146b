//! Similarity between metadata distributions and between ratio vectors.
//!
//! * `score_category`: `1 - Σ|a_j - e_j| / D_eff`, the sum running over cells
//!   included in both tables and `D_eff` counting domains that keep at least
//!   one such cell. Not clamped.
//! * `score_domain`: `1 - mean_j min(1, |a_j - e_j| / e_j)` over included
//!   cells with `e_j > 0`. Always in `[0, 1]`.

use indexmap::IndexMap;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionTable;
use crate::error::{Error, Result};
use crate::schema::MetadataSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub s_c: f64,
    pub s_d: f64,
    pub per_domain_abs_error: IndexMap<String, f64>,
    pub included_cell_count: usize,
}

fn check_pair(a: &DistributionTable, e: &DistributionTable, schema: &MetadataSchema) -> Result<()> {
    a.check_schema(schema)?;
    e.check_schema(schema)
}

fn effective(a: &DistributionTable, e: &DistributionTable, j: usize) -> bool {
    a.included[j] && e.included[j]
}

/// Number of domains holding at least one cell included in both tables.
fn effective_domains(a: &DistributionTable, e: &DistributionTable, schema: &MetadataSchema) -> usize {
    (0..schema.domain_count())
        .filter(|&d| schema.domain_cells(d).any(|j| effective(a, e, j)))
        .count()
}

pub fn score_category(a: &DistributionTable, e: &DistributionTable, schema: &MetadataSchema) -> Result<f64> {
    check_pair(a, e, schema)?;
    let d_eff = effective_domains(a, e, schema);
    if d_eff == 0 {
        return Err(Error::NoCells);
    }
    let l1: f64 = (0..schema.cell_count())
        .filter(|&j| effective(a, e, j))
        .map(|j| (a.values[j] - e.values[j]).abs())
        .sum();
    Ok(1.0 - l1 / d_eff as f64)
}

pub fn score_domain(a: &DistributionTable, e: &DistributionTable, schema: &MetadataSchema) -> Result<f64> {
    check_pair(a, e, schema)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..schema.cell_count() {
        if effective(a, e, j) && e.values[j] > 0.0 {
            sum += ((a.values[j] - e.values[j]).abs() / e.values[j]).min(1.0);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoCells);
    }
    Ok(1.0 - sum / count as f64)
}

/// Gradient of `score_category` with respect to `a.values`. At exact kinks
/// (`a_j == e_j`) the zero subgradient is used.
pub(crate) fn score_category_grad(
    a: &DistributionTable,
    e: &DistributionTable,
    schema: &MetadataSchema,
) -> Result<(f64, Vec<f64>)> {
    let value = score_category(a, e, schema)?;
    let d_eff = effective_domains(a, e, schema) as f64;
    let grad = (0..schema.cell_count())
        .map(|j| {
            if effective(a, e, j) {
                -sign(a.values[j] - e.values[j]) / d_eff
            } else {
                0.0
            }
        })
        .collect();
    Ok((value, grad))
}

/// Gradient of `score_domain` with respect to `a.values`. Cells saturated
/// by the `min(1, ·)` clamp (including the boundary) contribute zero.
pub(crate) fn score_domain_grad(
    a: &DistributionTable,
    e: &DistributionTable,
    schema: &MetadataSchema,
) -> Result<(f64, Vec<f64>)> {
    let value = score_domain(a, e, schema)?;
    let count = (0..schema.cell_count())
        .filter(|&j| effective(a, e, j) && e.values[j] > 0.0)
        .count() as f64;
    let grad = (0..schema.cell_count())
        .map(|j| {
            let ej = e.values[j];
            if !effective(a, e, j) || ej <= 0.0 {
                return 0.0;
            }
            let diff = a.values[j] - ej;
            if diff.abs() / ej >= 1.0 {
                0.0
            } else {
                -sign(diff) / (ej * count)
            }
        })
        .collect();
    Ok((value, grad))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn metric_report(a: &DistributionTable, e: &DistributionTable, schema: &MetadataSchema) -> Result<MetricReport> {
    let s_c = score_category(a, e, schema)?;
    let s_d = score_domain(a, e, schema)?;
    let mut per_domain_abs_error = IndexMap::new();
    for (d, spec) in schema.domains().iter().enumerate() {
        let cells: Vec<usize> = schema.domain_cells(d).filter(|&j| effective(a, e, j)).collect();
        if cells.is_empty() {
            continue;
        }
        let err = cells.iter().map(|&j| (a.values[j] - e.values[j]).abs()).sum();
        per_domain_abs_error.insert(spec.name.clone(), err);
    }
    let included_cell_count = (0..schema.cell_count()).filter(|&j| effective(a, e, j)).count();
    Ok(MetricReport {
        s_c,
        s_d,
        per_domain_abs_error,
        included_cell_count,
    })
}

/// Cosine similarity of two nonnegative vectors; 0 when either is all zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::SchemaMismatch(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&x, &y) in u.iter().zip(v) {
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 1.0))
}

fn mae(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(x, y)| (x - y).abs()).sum::<f64>() / u.len() as f64
}

/// Maps a linear pair index in `[0, n(n-1)/2)` to `(i, j)` with `i < j`,
/// pairs ordered row by row.
fn pair_at(k: usize, n: usize) -> (usize, usize) {
    // start of row i = i*(2n - i - 1)/2
    let row_start = |i: usize| i * (2 * n - i - 1) / 2;
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if row_start(mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let i = lo;
    (i, i + 1 + (k - row_start(i)))
}

/// Mean over vector pairs of the per-cell mean absolute difference. When
/// there are more than `pair_cap` pairs, `pair_cap` distinct pairs are drawn
/// uniformly with a generator seeded by `seed`.
pub fn avg_pairwise_mae<V: AsRef<[f64]>>(vectors: &[V], pair_cap: usize, seed: u64) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let len = vectors[0].as_ref().len();
    if vectors.iter().any(|v| v.as_ref().len() != len) || len == 0 {
        return Err(Error::SchemaMismatch("vectors differ in length".into()));
    }
    let pairs = n * (n - 1) / 2;
    if pairs <= pair_cap {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += mae(vectors[i].as_ref(), vectors[j].as_ref());
            }
        }
        return Ok(sum / pairs as f64);
    }
    if pair_cap == 0 {
        return Err(Error::InvalidConfig("pair_cap must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, pairs, pair_cap).into_vec();
    picks.sort_unstable();
    let sum: f64 = picks
        .into_iter()
        .map(|k| {
            let (i, j) = pair_at(k, n);
            mae(vectors[i].as_ref(), vectors[j].as_ref())
        })
        .sum();
    Ok(sum / pair_cap as f64)
}
