//! From-scratch differentiable classifier.
//!
//! Softmax regression (`hidden_dim == 0`) or a one-hidden-layer tanh network,
//! trained with shuffled mini-batch SGD plus classical momentum. Parameters
//! are stored as flat f32 (that is what goes on the wire); all arithmetic runs
//! in f64 so the analytic gradients survive a 1e-4 finite-difference check.

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::worldgen::{Dataset, LabeledSample};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

mod stream {
    pub const INIT: u64 = 0x4c01;
    pub const SHUFFLE: u64 = 0x4c02;
}

/// Probability floor used everywhere a log of a predicted probability is taken.
pub const PROB_CLIP: f64 = 1e-12;

/// Architecture of the classifier: `hidden_dim == 0` selects the linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl ModelShape {
    pub fn linear(input_dim: usize, num_classes: usize) -> Self {
        Self { input_dim, hidden_dim: 0, num_classes }
    }

    pub fn param_count(&self) -> usize {
        if self.hidden_dim == 0 {
            self.num_classes * self.input_dim + self.num_classes
        } else {
            self.hidden_dim * self.input_dim
                + self.hidden_dim
                + self.num_classes * self.hidden_dim
                + self.num_classes
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::Config(format!(
                "model shape needs positive input_dim and num_classes, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Flat f32 parameter vector plus its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f32>,
    pub shape: ModelShape,
}

impl ModelParams {
    /// Checks the length invariant; use at trust boundaries (e.g. after decode).
    pub fn new(values: Vec<f32>, shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.param_count() {
            return Err(Error::Contract(format!(
                "parameter vector has {} values, shape {shape:?} implies {}",
                values.len(),
                shape.param_count()
            )));
        }
        Ok(Self { values, shape })
    }

    fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Hyper-parameters for `sgd_train`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Zero-mean init at scale 1/sqrt(fan_in) for weights, zero biases.
/// Deterministic per seed.
pub fn init_params(shape: ModelShape, seed: u64) -> Result<ModelParams> {
    shape.validate()?;
    let mut rng = rng_for(seed, stream::INIT);
    let mut values = vec![0.0f32; shape.param_count()];
    if shape.hidden_dim == 0 {
        let w = Normal::new(0.0, 1.0 / (shape.input_dim as f64).sqrt()).unwrap();
        for v in values[..shape.num_classes * shape.input_dim].iter_mut() {
            *v = w.sample(&mut rng) as f32;
        }
    } else {
        let w1 = Normal::new(0.0, 1.0 / (shape.input_dim as f64).sqrt()).unwrap();
        let w2 = Normal::new(0.0, 1.0 / (shape.hidden_dim as f64).sqrt()).unwrap();
        let n1 = shape.hidden_dim * shape.input_dim;
        for v in values[..n1].iter_mut() {
            *v = w1.sample(&mut rng) as f32;
        }
        let off = n1 + shape.hidden_dim;
        for v in values[off..off + shape.num_classes * shape.hidden_dim].iter_mut() {
            *v = w2.sample(&mut rng) as f32;
        }
    }
    ModelParams::new(values, shape)
}

// ---------------------------------------------------------------------------
// f64 engine
// ---------------------------------------------------------------------------

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// Class probabilities for one sample, given flat f64 parameters.
/// Optionally captures the hidden activations for backprop.
fn probs_f64(shape: &ModelShape, w: &[f64], x: &[f32], hidden_out: Option<&mut Vec<f64>>) -> Vec<f64> {
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let mut logits = vec![0.0f64; c];
    if h == 0 {
        let bias = &w[c * d..];
        for (k, logit) in logits.iter_mut().enumerate() {
            let row = &w[k * d..(k + 1) * d];
            let mut acc = 0.0;
            for (wi, &xi) in row.iter().zip(x) {
                acc += wi * xi as f64;
            }
            *logit = acc + bias[k];
        }
    } else {
        let (w1, rest) = w.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        let mut hid = vec![0.0f64; h];
        for (j, hj) in hid.iter_mut().enumerate() {
            let row = &w1[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for (wi, &xi) in row.iter().zip(x) {
                acc += wi * xi as f64;
            }
            *hj = (acc + b1[j]).tanh();
        }
        for (k, logit) in logits.iter_mut().enumerate() {
            let row = &w2[k * h..(k + 1) * h];
            let mut acc = 0.0;
            for (wi, &hj) in row.iter().zip(&hid) {
                acc += wi * hj;
            }
            *logit = acc + b2[k];
        }
        if let Some(out) = hidden_out {
            *out = hid;
        }
    }
    softmax_in_place(&mut logits);
    logits
}

fn sample_loss_f64(shape: &ModelShape, w: &[f64], s: &LabeledSample) -> f64 {
    let p = probs_f64(shape, w, &s.features, None);
    -p[s.label].max(PROB_CLIP).ln()
}

fn loss_on_batch<'a>(
    shape: &ModelShape,
    w: &[f64],
    batch: impl Iterator<Item = &'a LabeledSample>,
    count: usize,
) -> f64 {
    let mut total = 0.0;
    for s in batch {
        total += sample_loss_f64(shape, w, s);
    }
    total / count as f64
}

/// Mean gradient and mean loss over the batch.
fn grad_on_batch<'a>(
    shape: &ModelShape,
    w: &[f64],
    batch: impl Iterator<Item = &'a LabeledSample>,
    count: usize,
) -> (Vec<f64>, f64) {
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let mut g = vec![0.0f64; w.len()];
    let mut loss = 0.0;
    let inv = 1.0 / count as f64;
    let mut hidden = Vec::new();
    for s in batch {
        let p = probs_f64(shape, w, &s.features, Some(&mut hidden));
        loss += -p[s.label].max(PROB_CLIP).ln();
        if h == 0 {
            let (gw, gb) = g.split_at_mut(c * d);
            for k in 0..c {
                let dlogit = (p[k] - if k == s.label { 1.0 } else { 0.0 }) * inv;
                let row = &mut gw[k * d..(k + 1) * d];
                for (gi, &xi) in row.iter_mut().zip(&s.features) {
                    *gi += dlogit * xi as f64;
                }
                gb[k] += dlogit;
            }
        } else {
            let w2 = &w[h * d + h..h * d + h + c * h];
            let (gw1, grest) = g.split_at_mut(h * d);
            let (gb1, grest) = grest.split_at_mut(h);
            let (gw2, gb2) = grest.split_at_mut(c * h);
            let mut dhid = vec![0.0f64; h];
            for k in 0..c {
                let dlogit = (p[k] - if k == s.label { 1.0 } else { 0.0 }) * inv;
                let row = &mut gw2[k * h..(k + 1) * h];
                for j in 0..h {
                    row[j] += dlogit * hidden[j];
                    dhid[j] += dlogit * w2[k * h + j];
                }
                gb2[k] += dlogit;
            }
            for j in 0..h {
                let dpre = dhid[j] * (1.0 - hidden[j] * hidden[j]);
                let row = &mut gw1[j * d..(j + 1) * d];
                for (gi, &xi) in row.iter_mut().zip(&s.features) {
                    *gi += dpre * xi as f64;
                }
                gb1[j] += dpre;
            }
        }
    }
    (g, loss * inv)
}

fn check_batch(shape: &ModelShape, batch: &[LabeledSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("batch must be nonempty".into()));
    }
    for s in batch {
        check_features(shape, &s.features)?;
        if s.label >= shape.num_classes {
            return Err(Error::Contract(format!(
                "label {} out of range for {} classes",
                s.label, shape.num_classes
            )));
        }
    }
    Ok(())
}

fn check_features(shape: &ModelShape, features: &[f32]) -> Result<()> {
    if features.len() != shape.input_dim {
        return Err(Error::Contract(format!(
            "feature vector has {} entries, model expects {}",
            features.len(),
            shape.input_dim
        )));
    }
    if features.iter().any(|f| !f.is_finite()) {
        return Err(Error::Contract("non-finite feature value".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Class probability vector for one sample. Stable softmax; sums to 1.
pub fn forward(params: &ModelParams, features: &[f32]) -> Result<Vec<f64>> {
    check_features(&params.shape, features)?;
    Ok(probs_f64(&params.shape, &params.to_f64(), features, None))
}

/// Mean cross-entropy `-log p_label` over the batch, probabilities clipped at 1e-12.
pub fn batch_loss(params: &ModelParams, batch: &[LabeledSample]) -> Result<f64> {
    check_batch(&params.shape, batch)?;
    Ok(loss_on_batch(&params.shape, &params.to_f64(), batch.iter(), batch.len()))
}

/// Analytic gradient of `batch_loss` with respect to every parameter.
pub fn grad(params: &ModelParams, batch: &[LabeledSample]) -> Result<Vec<f64>> {
    check_batch(&params.shape, batch)?;
    Ok(grad_on_batch(&params.shape, &params.to_f64(), batch.iter(), batch.len()).0)
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("step h must be positive, got {h}")));
    }
    Ok((f(x + h) - f(x - h)) / (2.0 * h))
}

/// Central-difference estimate of the `batch_loss` gradient, coordinate by
/// coordinate. Test oracle for `grad`; shares nothing with the backprop path.
pub fn finite_diff_grad(params: &ModelParams, batch: &[LabeledSample], h: f64) -> Result<Vec<f64>> {
    check_batch(&params.shape, batch)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("step h must be positive, got {h}")));
    }
    let shape = params.shape;
    let mut w = params.to_f64();
    let mut g = vec![0.0f64; w.len()];
    for i in 0..w.len() {
        let orig = w[i];
        g[i] = central_difference(
            |v| {
                w[i] = v;
                loss_on_batch(&shape, &w, batch.iter(), batch.len())
            },
            orig,
            h,
        )?;
        w[i] = orig;
    }
    Ok(g)
}

/// Shuffled mini-batch SGD with classical momentum (`v <- m v + g`,
/// `theta <- theta - lr v`). Shuffle order is deterministic per
/// `(config.seed, epoch)`; the input parameters are left untouched.
pub fn sgd_train(params: &ModelParams, dataset: &Dataset, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    if config.epochs == 0 {
        return Ok(params.clone());
    }
    if dataset.is_empty() {
        return Err(Error::Contract("sgd_train requires a nonempty dataset".into()));
    }
    check_batch(&params.shape, &dataset.samples)?;

    let shape = params.shape;
    let mut w = params.to_f64();
    let mut velocity = vec![0.0f64; w.len()];
    let n = dataset.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_for(config.seed, stream::SHUFFLE.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let (g, loss) = grad_on_batch(
                &shape,
                &w,
                chunk.iter().map(|&i| &dataset.samples[i]),
                chunk.len(),
            );
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            for i in 0..w.len() {
                velocity[i] = config.momentum * velocity[i] + g[i];
                w[i] -= config.learning_rate * velocity[i];
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite parameter at epoch {epoch}, step {step}"
                )));
            }
        }
    }
    ModelParams::new(w.into_iter().map(|v| v as f32).collect(), shape)
}

/// Accuracy (argmax ties to the lowest class index) and mean loss.
///
/// Per-sample losses are summed in value order so the result is exactly
/// invariant under dataset permutation.
pub fn evaluate(params: &ModelParams, dataset: &Dataset) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Contract("evaluate requires a nonempty dataset".into()));
    }
    check_batch(&params.shape, &dataset.samples)?;
    let w = params.to_f64();
    let mut correct = 0usize;
    let mut losses = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        let p = probs_f64(&params.shape, &w, &s.features, None);
        let mut best = 0usize;
        for (k, &pk) in p.iter().enumerate().skip(1) {
            if pk > p[best] {
                best = k;
            }
        }
        if best == s.label {
            correct += 1;
        }
        losses.push(-p[s.label].max(PROB_CLIP).ln());
    }
    losses.sort_by(f64::total_cmp);
    let mean_loss = losses.iter().sum::<f64>() / dataset.len() as f64;
    Ok((correct as f64 / dataset.len() as f64, mean_loss))
}
