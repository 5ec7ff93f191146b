//! Fully connected scoring network with hand-written reverse mode and Adam.
//!
//! Weights of a layer are stored row-major as `inputs × outputs`, so the
//! forward pass of one sample is a sequence of contiguous axpy updates.
//! Batches are split into fixed-size chunks that may be processed in
//! parallel; per-chunk gradients are always summed in chunk order, which
//! keeps results bit-identical for any thread count.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub hidden_activation: Activation,
    #[serde(default)]
    pub init_seed: u64,
}

impl NetConfig {
    /// Two hidden layers of width 128.
    pub fn for_inputs(inputs: usize, init_seed: u64) -> Self {
        Self {
            layer_sizes: vec![inputs, 128, 128, 1],
            hidden_activation: Activation::Relu,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 3 {
            return Err(Error::InvalidConfig("network needs at least one hidden layer".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("output layer must have size 1".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs × outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.outputs + output]
    }
}

/// Network parameters; the same shape is used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layers: Vec<Layer>,
}

/// Seeded Glorot-uniform weights, zero biases.
pub fn init_params(config: &NetConfig) -> Result<NetParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let layers = config
        .layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let mut layer = Layer::zeros(fan_in, fan_out);
            for v in layer.weights.iter_mut() {
                *v = dist.sample(&mut rng);
            }
            layer
        })
        .collect();
    Ok(NetParams { layers })
}

impl NetParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weight and bias tensors in a fixed order.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    /// Parameter `idx` in flat `tensors()` order.
    pub fn get(&self, mut idx: usize) -> f64 {
        for t in self.tensors() {
            if idx < t.len() {
                return t[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set(&mut self, mut idx: usize, value: f64) {
        for t in self.tensors_mut() {
            if idx < t.len() {
                t[idx] = value;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }

    fn add_assign(&mut self, other: &NetParams) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_batch<V: AsRef<[f64]>>(&self, batch: &[V]) -> Result<()> {
        let n = self.inputs();
        if let Some(v) = batch.iter().find(|v| v.as_ref().len() != n) {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {n}",
                v.as_ref().len()
            )));
        }
        Ok(())
    }

    /// Activations of every layer for a chunk of rows, flat `rows × width`.
    /// Entry 0 is the input itself; the last entry holds the scores.
    fn forward_chunk<V: AsRef<[f64]>>(&self, rows: &[V]) -> Vec<Vec<f64>> {
        let b = rows.len();
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut input = Vec::with_capacity(b * self.inputs());
        for r in rows {
            input.extend_from_slice(r.as_ref());
        }
        acts.push(input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = &acts[l];
            let mut out = Vec::with_capacity(b * layer.outputs);
            for r in 0..b {
                out.extend_from_slice(&layer.bias);
                let z = &mut out[r * layer.outputs..];
                for (k, &x) in prev[r * layer.inputs..(r + 1) * layer.inputs].iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[k * layer.outputs..(k + 1) * layer.outputs];
                    for (zo, wo) in z.iter_mut().zip(w) {
                        *zo += x * wo;
                    }
                }
            }
            if l < last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Reverse pass over one chunk given its activations and d(objective)/d(score).
    fn backward_chunk(&self, acts: &[Vec<f64>], upstream: &[f64]) -> NetParams {
        let b = upstream.len();
        let mut grads = self.zeros_like();
        let mut dz: Vec<f64> = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let prev = &acts[l];
            let (fan_in, fan_out) = (layer.inputs, layer.outputs);
            for r in 0..b {
                let dzr = &dz[r * fan_out..(r + 1) * fan_out];
                for (gb, d) in g.bias.iter_mut().zip(dzr) {
                    *gb += d;
                }
                for (k, &x) in prev[r * fan_in..(r + 1) * fan_in].iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[k * fan_out..(k + 1) * fan_out];
                    for (w, d) in gw.iter_mut().zip(dzr) {
                        *w += x * d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut dprev = vec![0.0; b * fan_in];
            for r in 0..b {
                let dzr = &dz[r * fan_out..(r + 1) * fan_out];
                let a = &prev[r * fan_in..(r + 1) * fan_in];
                let dp = &mut dprev[r * fan_in..(r + 1) * fan_in];
                for k in 0..fan_in {
                    // relu'(z) = 1 iff the activation is positive
                    if a[k] > 0.0 {
                        let w = &layer.weights[k * fan_out..(k + 1) * fan_out];
                        dp[k] = w.iter().zip(dzr).map(|(x, y)| x * y).sum();
                    }
                }
            }
            dz = dprev;
        }
        grads
    }

    /// Forward pass keeping the activations needed by [`NetParams::backward`].
    pub fn forward<V: AsRef<[f64]> + Sync>(&self, batch: &[V]) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        let chunks: Vec<Vec<Vec<f64>>> = batch.par_chunks(CHUNK).map(|c| self.forward_chunk(c)).collect();
        let scores: Vec<f64> = chunks.iter().flat_map(|a| a.last().unwrap().iter().copied()).collect();
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("non-finite score at batch position {i}")));
        }
        Ok(ForwardPass { scores, chunks })
    }

    /// Gradient of `Σ_i upstream[i] · score_i` with respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<NetParams> {
        if upstream.len() != pass.scores.len() {
            return Err(Error::Shape(format!(
                "{} upstream gradients for a batch of {}",
                upstream.len(),
                pass.scores.len()
            )));
        }
        if upstream.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite upstream gradient".into()));
        }
        let parts: Vec<NetParams> = pass
            .chunks
            .par_iter()
            .zip(upstream.par_chunks(CHUNK))
            .map(|(acts, up)| self.backward_chunk(acts, up))
            .collect();
        let mut total = self.zeros_like();
        for p in &parts {
            total.add_assign(p);
        }
        Ok(total)
    }
}

/// Scores and cached activations of one batch.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub scores: Vec<f64>,
    chunks: Vec<Vec<Vec<f64>>>,
}

pub fn score_batch<V: AsRef<[f64]> + Sync>(params: &NetParams, batch: &[V]) -> Result<Vec<f64>> {
    Ok(params.forward(batch)?.scores)
}

pub fn backprop<V: AsRef<[f64]> + Sync>(params: &NetParams, batch: &[V], upstream: &[f64]) -> Result<NetParams> {
    if upstream.len() != batch.len() {
        return Err(Error::Shape(format!(
            "{} upstream gradients for a batch of {}",
            upstream.len(),
            batch.len()
        )));
    }
    let pass = params.forward(batch)?;
    params.backward(&pass, upstream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: NetParams,
    v: NetParams,
}

impl AdamState {
    pub fn new(params: &NetParams, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when any
/// gradient is non-finite.
pub fn adam_step(params: &mut NetParams, grads: &NetParams, state: &mut AdamState) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    if grads.parameter_count() != params.parameter_count() || state.m.parameter_count() != params.parameter_count() {
        return Err(Error::Shape("gradient shape differs from parameters".into()));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

pub const CHECKPOINT_FORMAT: &str = "metasel-net/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: NetConfig,
    pub layers: Vec<Layer>,
    /// Free-form provenance (config hash, corpus hash, ...).
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl Checkpoint {
    pub fn new(config: &NetConfig, params: &NetParams, meta: Map<String, Value>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            config: config.clone(),
            layers: params.layers.clone(),
            meta,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses a checkpoint and checks every layer against the echoed config.
    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidConfig(format!("unsupported checkpoint format {:?}", ck.format)));
        }
        ck.config.validate()?;
        let sizes = &ck.config.layer_sizes;
        if ck.layers.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "{} layers stored, config implies {}",
                ck.layers.len(),
                sizes.len() - 1
            )));
        }
        for (i, (layer, w)) in ck.layers.iter().zip(sizes.windows(2)).enumerate() {
            if layer.inputs != w[0]
                || layer.outputs != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.bias.len() != w[1]
            {
                return Err(Error::Shape(format!("layer {i} does not match {}x{}", w[0], w[1])));
            }
        }
        let params = ck.params();
        if !params.all_finite() {
            return Err(Error::Numeric("checkpoint holds non-finite parameters".into()));
        }
        Ok(ck)
    }

    pub fn params(&self) -> NetParams {
        NetParams {
            layers: self.layers.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetParams {
        // 2-2-1: h0 = relu(x0 + x1), h1 = relu(x0 - x1 - 1), out = 2*h0 - h1 + 0.5
        NetParams {
            layers: vec![
                Layer {
                    inputs: 2,
                    outputs: 2,
                    weights: vec![1.0, 1.0, 1.0, -1.0],
                    bias: vec![0.0, -1.0],
                },
                Layer {
                    inputs: 2,
                    outputs: 1,
                    weights: vec![2.0, -1.0],
                    bias: vec![0.5],
                },
            ],
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = NetConfig {
            layer_sizes: vec![4, 2, 1],
            hidden_activation: Activation::Relu,
            init_seed: 3,
        };
        let a = init_params(&cfg).unwrap();
        assert_eq!(a, init_params(&cfg).unwrap());
        assert_eq!((a.layers[0].inputs, a.layers[0].outputs), (4, 2));
        assert_eq!((a.layers[1].inputs, a.layers[1].outputs), (2, 1));
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let other = init_params(&NetConfig { init_seed: 4, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn init_variance_matches_glorot() {
        let cfg = NetConfig {
            layer_sizes: vec![128, 128, 1],
            hidden_activation: Activation::Relu,
            init_seed: 11,
        };
        let p = init_params(&cfg).unwrap();
        let w = &p.layers[0].weights;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 2.0 / 256.0;
        assert!((var - target).abs() < 0.2 * target, "var {var} target {target}");
    }

    #[test]
    fn config_validation() {
        for sizes in [vec![3, 1], vec![3, 0, 1], vec![3, 4, 2]] {
            let cfg = NetConfig {
                layer_sizes: sizes,
                hidden_activation: Activation::Relu,
                init_seed: 0,
            };
            assert!(init_params(&cfg).is_err());
        }
    }

    #[test]
    fn zero_network_scores_zero() {
        let cfg = NetConfig::for_inputs(5, 0);
        let p = init_params(&cfg).unwrap().zeros_like();
        let scores = score_batch(&p, &[vec![0.3; 5], vec![1.0; 5]]).unwrap();
        assert_eq!(scores, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_built_network() {
        let p = tiny();
        // x = (0.75, 0.5): h0 = 1.25, h1 = relu(-0.75) = 0, out = 2.5 + 0.5
        // x = (1.0, 0.0): h0 = 1, h1 = relu(0) = 0, out = 2.5
        // x = (0.2, 0.9): h0 = 1.1, h1 = 0, out = 2.7
        let s = score_batch(&p, &[[0.75, 0.5], [1.0, 0.0], [0.2, 0.9]]).unwrap();
        for (got, want) in s.iter().zip([3.0, 2.5, 2.7]) {
            assert!((got - want).abs() < 1e-12);
        }
        let mut shifted = tiny();
        shifted.layers[0].bias = vec![0.0, 1.0];
        // h1 = relu(0.75 - 0.5 + 1) = 1.25, out = 2.5 - 1.25 + 0.5
        assert_eq!(score_batch(&shifted, &[[0.75, 0.5]]).unwrap(), vec![1.75]);
    }

    #[test]
    fn batch_equals_single_and_is_order_preserving() {
        let p = init_params(&NetConfig::for_inputs(6, 5)).unwrap();
        let batch: Vec<Vec<f64>> = (0..150).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 11) as f64 / 11.0).collect()).collect();
        let all = score_batch(&p, &batch).unwrap();
        for (v, s) in batch.iter().zip(&all) {
            assert_eq!(score_batch(&p, std::slice::from_ref(v)).unwrap()[0], *s);
        }
        let mut rev = batch.clone();
        rev.reverse();
        let mut all_rev = score_batch(&p, &rev).unwrap();
        all_rev.reverse();
        assert_eq!(all, all_rev);
    }

    #[test]
    fn shape_errors() {
        let p = tiny();
        assert!(matches!(score_batch(&p, &[vec![1.0; 3]]), Err(Error::Shape(_))));
        assert!(matches!(backprop(&p, &[vec![1.0; 2]], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn backprop_simple_identities() {
        let p = init_params(&NetConfig::for_inputs(4, 1)).unwrap();
        let batch = vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.9, 0.0, 0.5, 0.5], vec![0.0; 4]];
        let zero = backprop(&p, &batch, &[0.0; 3]).unwrap();
        assert!(zero.tensors().all(|t| t.iter().all(|&g| g == 0.0)));
        let up = [0.5, -2.0, 1.25];
        let g = backprop(&p, &batch, &up).unwrap();
        let out_bias = g.layers.last().unwrap().bias[0];
        assert!((out_bias - up.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = init_params(&NetConfig::for_inputs(3, 2)).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let z = p.zeros_like();
        adam_step(&mut p, &z, &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    fn scalar_params(x: f64) -> NetParams {
        NetParams {
            layers: vec![Layer {
                inputs: 1,
                outputs: 1,
                weights: vec![x],
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn adam_first_step_is_lr() {
        let mut p = scalar_params(1.0);
        let mut g = scalar_params(1.0);
        g.layers[0].bias[0] = 0.0;
        let mut st = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!((p.layers[0].weights[0] - (1.0 - 0.01)).abs() < 1e-9);
    }

    #[test]
    fn adam_matches_scalar_reference() {
        // Reference trajectory written out longhand for g_t = 0.3 * t - 1.
        let cfg = AdamConfig::default();
        let mut x = 0.5f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=10 {
            let g = 0.3 * t as f64 - 1.0;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
            reference.push(x);
        }
        let mut p = scalar_params(0.5);
        let mut st = AdamState::new(&p, cfg);
        for (t, want) in (1..=10).zip(reference) {
            let mut g = scalar_params(0.3 * t as f64 - 1.0);
            g.layers[0].bias[0] = 0.0;
            adam_step(&mut p, &g, &mut st).unwrap();
            assert!((p.layers[0].weights[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = scalar_params(1.0);
        let g = scalar_params(f64::NAN);
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(Error::Numeric(_))));
        assert_eq!(p, scalar_params(1.0));
    }

    #[test]
    fn checkpoint_round_trip_and_validation() {
        let cfg = NetConfig {
            layer_sizes: vec![3, 4, 1],
            hidden_activation: Activation::Relu,
            init_seed: 8,
        };
        let p = init_params(&cfg).unwrap();
        let ck = Checkpoint::new(&cfg, &p, Map::new());
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back.params(), p);

        let mut bad = ck.clone();
        bad.layers[1].weights.pop();
        assert!(Checkpoint::from_json(&bad.to_json()).is_err());
        let mut bad = ck.clone();
        bad.config.layer_sizes = vec![3, 5, 1];
        assert!(Checkpoint::from_json(&bad.to_json()).is_err());
        assert!(Checkpoint::from_json("{}").is_err());
    }
}
