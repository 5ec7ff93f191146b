//! Trains the scoring network so that the top-ρ scored part of each batch
//! reproduces the expected distribution.
//!
//! Hard top-ρ selection has no useful gradient, so training uses a soft
//! selection: `w_i = σ((s_i − τ) / t)` with `τ` the empirical `(1 − ρ)`
//! quantile of the batch scores. The weighted aggregate of tag durations
//! then plays the role of the selected subset's distribution.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{validate_expected, DistributionTable};
use crate::error::{Error, Result};
use crate::metrics::{score_category, score_category_grad, score_domain, score_domain_grad};
use crate::net::{adam_step, init_params, AdamConfig, AdamState, NetConfig, NetParams};
use crate::sample::{phi_corpus, RatioVector, SampleMetadata};
use crate::schema::MetadataSchema;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    #[default]
    Category,
    Domain,
    /// `α (1 − S_c) + (1 − α)(1 − S_d)`
    Blend(f64),
}

impl MetricChoice {
    fn validate(self) -> Result<()> {
        match self {
            MetricChoice::Blend(a) if !(0.0..=1.0).contains(&a) => {
                Err(Error::InvalidConfig(format!("blend weight {a} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// How the batch threshold enters the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdGradient {
    /// Differentiate through the interpolated quantile (the true gradient).
    #[default]
    Exact,
    /// Treat the threshold as a constant of the batch.
    StraightThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub keep_ratio: f64,
    pub metric: MetricChoice,
    pub temperature: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    pub threshold_gradient: ThresholdGradient,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            batch_size: 1024,
            keep_ratio: 0.5,
            metric: MetricChoice::Category,
            temperature: 0.2,
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            threshold_gradient: ThresholdGradient::Exact,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("keep ratio {} outside (0, 1]", self.keep_ratio)));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch size must be at least 2".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        self.metric.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft selection of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSelection {
    pub weights: Vec<f64>,
    pub threshold: f64,
    /// Batch positions of the two order statistics the threshold
    /// interpolates between, and the interpolation fraction.
    lower: usize,
    upper: usize,
    frac: f64,
}

pub fn soft_select(scores: &[f64], keep_ratio: f64, temperature: f64) -> Result<SoftSelection> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::InsufficientBatch(n));
    }
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!("keep ratio {keep_ratio} outside (0, 1]")));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidConfig("temperature must be positive".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let h = (n - 1) as f64 * (1.0 - keep_ratio);
    let lo = (h.floor() as usize).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    let (lower, upper) = (order[lo], order[hi]);
    let threshold = scores[lower] + frac * (scores[upper] - scores[lower]);
    let weights = scores.iter().map(|&s| logistic((s - threshold) / temperature)).collect();
    Ok(SoftSelection {
        weights,
        threshold,
        lower,
        upper,
        frac,
    })
}

/// Weights `σ((s_i − τ)/t)` around the `(1 − ρ)` score quantile `τ`.
pub fn soft_select_weights(scores: &[f64], keep_ratio: f64, temperature: f64) -> Result<Vec<f64>> {
    Ok(soft_select(scores, keep_ratio, temperature)?.weights)
}

fn soft_aggregate_refs(weights: &[f64], samples: &[&SampleMetadata], schema: &MetadataSchema) -> Result<(DistributionTable, f64)> {
    if weights.len() != samples.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} samples",
            weights.len(),
            samples.len()
        )));
    }
    let m = schema.cell_count();
    let mut sums = vec![0.0; m];
    let mut total = 0.0;
    for (&w, s) in weights.iter().zip(samples) {
        s.check_schema(schema)?;
        for (acc, t) in sums.iter_mut().zip(s.tag_durations()) {
            *acc += w * t;
        }
        total += w * s.total_duration_s();
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateBatch);
    }
    Ok((DistributionTable::new(sums.into_iter().map(|v| v / total).collect()), total))
}

/// `Σ w_i·tag_i / Σ w_i·duration_i` per cell.
pub fn soft_aggregate(weights: &[f64], samples: &[SampleMetadata], schema: &MetadataSchema) -> Result<DistributionTable> {
    let refs: Vec<&SampleMetadata> = samples.iter().collect();
    Ok(soft_aggregate_refs(weights, &refs, schema)?.0)
}

pub fn loss(a: &DistributionTable, e: &DistributionTable, metric: MetricChoice, schema: &MetadataSchema) -> Result<f64> {
    Ok(match metric {
        MetricChoice::Category => 1.0 - score_category(a, e, schema)?,
        MetricChoice::Domain => 1.0 - score_domain(a, e, schema)?,
        MetricChoice::Blend(alpha) => {
            alpha * (1.0 - score_category(a, e, schema)?) + (1.0 - alpha) * (1.0 - score_domain(a, e, schema)?)
        }
    })
}

/// Loss and its gradient with respect to `a.values`.
fn loss_and_grad(
    a: &DistributionTable,
    e: &DistributionTable,
    metric: MetricChoice,
    schema: &MetadataSchema,
) -> Result<(f64, Vec<f64>)> {
    let negate = |(v, g): (f64, Vec<f64>), w: f64| (w * (1.0 - v), g.into_iter().map(|x| -w * x).collect::<Vec<_>>());
    Ok(match metric {
        MetricChoice::Category => negate(score_category_grad(a, e, schema)?, 1.0),
        MetricChoice::Domain => negate(score_domain_grad(a, e, schema)?, 1.0),
        MetricChoice::Blend(alpha) => {
            let (lc, gc) = negate(score_category_grad(a, e, schema)?, alpha);
            let (ld, gd) = negate(score_domain_grad(a, e, schema)?, 1.0 - alpha);
            (lc + ld, gc.iter().zip(&gd).map(|(x, y)| x + y).collect())
        }
    })
}

/// Loss of one batch and its gradient with respect to the batch scores.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pub loss: f64,
    pub s_c: f64,
    pub s_d: f64,
    pub score_grads: Vec<f64>,
}

pub fn evaluate_batch(
    scores: &[f64],
    samples: &[&SampleMetadata],
    e: &DistributionTable,
    schema: &MetadataSchema,
    cfg: &TrainConfig,
) -> Result<BatchEval> {
    let sel = soft_select(scores, cfg.keep_ratio, cfg.temperature)?;
    let (a, total) = soft_aggregate_refs(&sel.weights, samples, schema)?;
    let (loss, grad_a) = loss_and_grad(&a, e, cfg.metric, schema)?;
    let s_c = score_category(&a, e, schema)?;
    let s_d = score_domain(&a, e, schema).unwrap_or(f64::NAN);

    // dA_j/dw_i = (tag_ij − A_j·dur_i) / total
    let ga_dot_a: f64 = grad_a.iter().zip(&a.values).map(|(g, v)| g * v).sum();
    let t = cfg.temperature;
    let mut score_grads: Vec<f64> = samples
        .iter()
        .zip(&sel.weights)
        .map(|(s, &w)| {
            let ga_dot_tag: f64 = grad_a.iter().zip(s.tag_durations()).map(|(g, x)| g * x).sum();
            let dl_dw = (ga_dot_tag - s.total_duration_s() * ga_dot_a) / total;
            dl_dw * w * (1.0 - w) / t
        })
        .collect();
    if cfg.threshold_gradient == ThresholdGradient::Exact {
        // dw_i/dτ = −σ'·/t, so dL/dτ = −Σ_i dL/ds_i (straight-through part)
        let dl_dtau: f64 = -score_grads.iter().sum::<f64>();
        score_grads[sel.lower] += dl_dtau * (1.0 - sel.frac);
        score_grads[sel.upper] += dl_dtau * sel.frac;
    }
    Ok(BatchEval {
        loss,
        s_c,
        s_d,
        score_grads,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub s_c: f64,
    pub s_d: f64,
    pub seconds: f64,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,s_c,s_d,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{},{:.6}\n", e.epoch, e.loss, e.s_c, e.s_d, e.seconds));
        }
        out
    }
}

/// Splits `n` items into `ceil(n / k)` contiguous batches whose sizes differ
/// by at most one.
fn batch_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let b = n.div_ceil(k);
    (0..b).map(|i| (i * n / b, (i + 1) * n / b)).collect()
}

pub struct Trainer<'a> {
    corpus: &'a [SampleMetadata],
    inputs: Vec<RatioVector>,
    e: &'a DistributionTable,
    schema: &'a MetadataSchema,
    cfg: TrainConfig,
}

impl<'a> Trainer<'a> {
    pub fn new(
        corpus: &'a [SampleMetadata],
        e: &'a DistributionTable,
        schema: &'a MetadataSchema,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if corpus.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: corpus.len(),
            });
        }
        let (_, warnings) = validate_expected(e.clone(), schema)?;
        for w in warnings {
            tracing::warn!("{w}");
        }
        let inputs = phi_corpus(corpus, schema)?;
        Ok(Self {
            corpus,
            inputs,
            e,
            schema,
            cfg,
        })
    }

    /// Loss of the batch given by `indices` under `params`.
    pub fn batch_loss(&self, params: &NetParams, indices: &[usize]) -> Result<f64> {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.inputs[i].as_slice()).collect();
        let samples: Vec<&SampleMetadata> = indices.iter().map(|&i| &self.corpus[i]).collect();
        let scores = params.forward(&rows)?.scores;
        Ok(evaluate_batch(&scores, &samples, self.e, self.schema, &self.cfg)?.loss)
    }

    /// Loss and parameter gradient of the batch given by `indices`.
    pub fn batch_gradient(&self, params: &NetParams, indices: &[usize]) -> Result<(BatchEval, NetParams)> {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.inputs[i].as_slice()).collect();
        let samples: Vec<&SampleMetadata> = indices.iter().map(|&i| &self.corpus[i]).collect();
        let pass = params.forward(&rows)?;
        let eval = evaluate_batch(&pass.scores, &samples, self.e, self.schema, &self.cfg)?;
        let grads = params.backward(&pass, &eval.score_grads)?;
        Ok((eval, grads))
    }

    pub fn run(&self, net_config: &NetConfig) -> Result<(NetParams, TrainLog)> {
        if net_config.inputs() != self.schema.cell_count() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, schema has {} cells",
                net_config.inputs(),
                self.schema.cell_count()
            )));
        }
        let params = init_params(net_config)?;
        self.run_from(params)
    }

    pub fn run_from(&self, mut params: NetParams) -> Result<(NetParams, TrainLog)> {
        let n = self.corpus.len();
        let mut adam = AdamState::new(&params, self.cfg.adam());
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.shuffle_seed);
        let mut order: Vec<usize> = (0..n).collect();
        let bounds = batch_bounds(n, self.cfg.batch_size);
        let mut log = TrainLog::default();
        for epoch in 0..self.cfg.epochs {
            let started = Instant::now();
            order.shuffle(&mut rng);
            let (mut loss, mut s_c, mut s_d, mut done, mut skipped) = (0.0, 0.0, 0.0, 0usize, 0usize);
            for &(lo, hi) in &bounds {
                match self.batch_gradient(&params, &order[lo..hi]) {
                    Ok((eval, grads)) => {
                        adam_step(&mut params, &grads, &mut adam)
                            .map_err(|e| Error::TrainingFailed(format!("epoch {epoch}: {e}")))?;
                        loss += eval.loss;
                        s_c += eval.s_c;
                        s_d += eval.s_d;
                        done += 1;
                    }
                    Err(err @ (Error::DegenerateBatch | Error::InsufficientBatch(_) | Error::NoCells)) => {
                        tracing::warn!(epoch, batch_start = lo, "skipping batch: {err}");
                        skipped += 1;
                    }
                    Err(err) => return Err(Error::TrainingFailed(format!("epoch {epoch}: {err}"))),
                }
            }
            if done == 0 {
                return Err(Error::TrainingFailed(format!("every batch of epoch {epoch} was degenerate")));
            }
            let k = done as f64;
            log.epochs.push(EpochStats {
                epoch,
                loss: loss / k,
                s_c: s_c / k,
                s_d: s_d / k,
                seconds: started.elapsed().as_secs_f64(),
                skipped_batches: skipped,
            });
        }
        Ok((params, log))
    }
}

/// Trains a freshly initialised network on `corpus` towards `e`.
pub fn train(
    corpus: &[SampleMetadata],
    e: &DistributionTable,
    schema: &MetadataSchema,
    net_config: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(NetParams, TrainLog)> {
    Trainer::new(corpus, e, schema, cfg.clone())?.run(net_config)
}
