//! Differentiable model kernel.
//!
//! Three model families share one parameter representation ([`ParamVector`]):
//!
//! * `Quadratic`: `f(θ) = Σ_c ½‖θ − c‖²` over one or more centers. The
//!   dataset is ignored. A single party owns one center; the centralized
//!   objective of two parties carries both.
//! * `Logistic`: multinomial softmax regression.
//! * `Mlp`: fully connected network with tanh hidden layers and a softmax
//!   output.
//!
//! Classification parameters are stored layer by layer; each layer is an
//! `out × in` row-major weight matrix followed by `out` biases. Softmax
//! regression is exactly an MLP with no hidden layers.

use std::ops::{Deref, DerefMut};

use rand::Rng as _;

use crate::exec;
use crate::{Error, Result};

/// Model parameters θ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &[f64]) {
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += scale * b;
        }
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// How per-record losses combine into a dataset loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum of per-record losses. Losses of disjoint datasets add up exactly,
    /// so this is the form parties exchange and combine.
    Sum,
    /// Mean per-record loss, for reporting and for SGD step sizes.
    Mean,
}

/// Labeled feature records stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            if !features.is_empty() {
                return Err(Error::InvalidArgument(
                    "zero-dimensional dataset cannot carry features".into(),
                ));
            }
        } else if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                found: features.len(),
            });
        }
        Ok(Dataset {
            dim,
            features,
            labels,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Dataset {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, usize)]) -> Result<Self> {
        let mut features = Vec::with_capacity(dim * rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (x, y) in rows {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            features.extend_from_slice(x);
            labels.push(*y);
        }
        Dataset::new(dim, features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            dim: self.dim,
            features,
            labels,
        }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Dataset {
            dim: self.dim,
            features,
            labels,
        })
    }

    /// Record counts per class for `num_classes` classes.
    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for &y in &self.labels {
            if y < num_classes {
                counts[y] += 1;
            }
        }
        counts
    }

    /// One more than the largest label, or zero when empty.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Model family and shape.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Quadratic {
        centers: Vec<ParamVector>,
    },
    Logistic {
        input_dim: usize,
        num_classes: usize,
    },
    Mlp {
        input_dim: usize,
        hidden: Vec<usize>,
        num_classes: usize,
    },
}

impl ModelSpec {
    pub fn quadratic(center: Vec<f64>) -> Self {
        ModelSpec::Quadratic {
            centers: vec![ParamVector(center)],
        }
    }

    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec::Logistic {
            input_dim,
            num_classes,
        }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Self {
        ModelSpec::Mlp {
            input_dim,
            hidden,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Quadratic { centers } => {
                let first = centers.first().ok_or_else(|| {
                    Error::InvalidArgument("quadratic model needs a center".into())
                })?;
                if first.is_empty() {
                    return Err(Error::InvalidArgument(
                        "quadratic center must be nonempty".into(),
                    ));
                }
                for c in centers {
                    if c.len() != first.len() {
                        return Err(Error::DimensionMismatch {
                            expected: first.len(),
                            found: c.len(),
                        });
                    }
                    if !c.is_finite() {
                        return Err(Error::InvalidArgument("non-finite quadratic center".into()));
                    }
                }
                Ok(())
            }
            ModelSpec::Logistic {
                input_dim,
                num_classes,
            }
            | ModelSpec::Mlp {
                input_dim,
                num_classes,
                ..
            } => {
                if *input_dim == 0 || *num_classes == 0 {
                    return Err(Error::InvalidArgument(
                        "input_dim and num_classes must be positive".into(),
                    ));
                }
                if let ModelSpec::Mlp { hidden, .. } = self {
                    if hidden.contains(&0) {
                        return Err(Error::InvalidArgument(
                            "hidden layer sizes must be positive".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self, ModelSpec::Quadratic { .. })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelSpec::Quadratic { centers } => centers.first().map_or(0, |c| c.len()),
            ModelSpec::Logistic { input_dim, .. } | ModelSpec::Mlp { input_dim, .. } => *input_dim,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self {
            ModelSpec::Quadratic { .. } => None,
            ModelSpec::Logistic { num_classes, .. } | ModelSpec::Mlp { num_classes, .. } => {
                Some(*num_classes)
            }
        }
    }

    /// Layer widths from input to output; empty for quadratic models.
    fn layer_sizes(&self) -> Vec<usize> {
        match self {
            ModelSpec::Quadratic { .. } => Vec::new(),
            ModelSpec::Logistic {
                input_dim,
                num_classes,
            } => vec![*input_dim, *num_classes],
            ModelSpec::Mlp {
                input_dim,
                hidden,
                num_classes,
            } => {
                let mut s = vec![*input_dim];
                s.extend_from_slice(hidden);
                s.push(*num_classes);
                s
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelSpec::Quadratic { .. } => self.input_dim(),
            _ => self
                .layer_sizes()
                .windows(2)
                .map(|w| w[0] * w[1] + w[1])
                .sum(),
        }
    }

    /// Objective of the union of two parties.
    ///
    /// Classification specs must be identical. Quadratic specs merge their
    /// centers, so the merged loss is the sum of both parties' losses.
    pub fn merge(&self, other: &ModelSpec) -> Result<ModelSpec> {
        match (self, other) {
            (ModelSpec::Quadratic { centers: a }, ModelSpec::Quadratic { centers: b }) => {
                let mut centers = a.clone();
                centers.extend(b.iter().cloned());
                let merged = ModelSpec::Quadratic { centers };
                merged.validate()?;
                Ok(merged)
            }
            (a, b) if a == b => Ok(a.clone()),
            _ => Err(Error::InvalidArgument(
                "cannot merge different model specs".into(),
            )),
        }
    }
}

/// Deterministic initial parameters: zeros for quadratic and logistic
/// models; Glorot-uniform weights and zero biases for MLPs.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    match spec {
        ModelSpec::Quadratic { .. } | ModelSpec::Logistic { .. } => {
            ParamVector::zeros(spec.param_count())
        }
        ModelSpec::Mlp { .. } => {
            let mut rng = crate::rng::rng(seed);
            let mut values = Vec::with_capacity(spec.param_count());
            for w in spec.layer_sizes().windows(2) {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for _ in 0..fan_in * fan_out {
                    values.push(rng.random_range(-bound..=bound));
                }
                values.extend(std::iter::repeat_n(0.0, fan_out));
            }
            ParamVector(values)
        }
    }
}

fn check_params(spec: &ModelSpec, params: &[f64]) -> Result<()> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: params.len(),
        });
    }
    Ok(())
}

fn check_data(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            found: data.dim(),
        });
    }
    let k = spec.num_classes().unwrap_or(0);
    if let Some(&label) = data.labels().iter().find(|&&y| y >= k) {
        return Err(Error::InvalidLabel {
            label,
            num_classes: k,
        });
    }
    Ok(())
}

/// Feed-forward network view over a flat parameter slice.
pub(crate) struct Network<'a> {
    sizes: Vec<usize>,
    params: &'a [f64],
}

/// Per-layer activations reused across records.
pub(crate) struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Network<'a> {
    pub(crate) fn new(spec: &ModelSpec, params: &'a [f64]) -> Self {
        Network {
            sizes: spec.layer_sizes(),
            params,
        }
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::new(),
            next: Vec::new(),
        }
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset, fan_in, fan_out)
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let o = offset;
            offset += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    /// Runs the forward pass; the output logits end up in the last
    /// activation buffer.
    pub(crate) fn forward<'s>(&self, x: &[f64], s: &'s mut Scratch) -> &'s [f64] {
        s.acts[0].copy_from_slice(x);
        let n_layers = self.sizes.len() - 1;
        for (l, (off, fan_in, fan_out)) in self.layers().enumerate() {
            let (inputs, outputs) = s.acts.split_at_mut(l + 1);
            let input = &inputs[l];
            let out = &mut outputs[0];
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let z = b[o] + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out[o] = if l + 1 < n_layers { z.tanh() } else { z };
            }
        }
        &s.acts[n_layers]
    }

    /// Cross-entropy of one record; when `grad` is given the record's
    /// gradient scaled by `scale` is added into it.
    pub(crate) fn record_loss(
        &self,
        x: &[f64],
        label: usize,
        s: &mut Scratch,
        grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        self.forward(x, s);
        let logits = &s.acts[self.sizes.len() - 1];
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum_exp.ln();
        let loss = lse - logits[label];
        if let Some((g, scale)) = grad {
            s.delta.clear();
            s.delta.extend(logits.iter().map(|z| scale * (z - lse).exp()));
            s.delta[label] -= scale;
            self.backward(s, g);
        }
        loss
    }

    /// Backpropagates `s.delta` (gradient w.r.t. the output logits).
    fn backward(&self, s: &mut Scratch, g: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        for (l, &(off, fan_in, fan_out)) in layers.iter().enumerate().rev() {
            let input = &s.acts[l];
            {
                let gw = &mut g[off..off + fan_in * fan_out];
                for o in 0..fan_out {
                    let d = s.delta[o];
                    if d != 0.0 {
                        for (gi, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                            *gi += d * xi;
                        }
                    }
                }
            }
            for o in 0..fan_out {
                g[off + fan_in * fan_out + o] += s.delta[o];
            }
            if l > 0 {
                let w = &self.params[off..off + fan_in * fan_out];
                s.next.clear();
                s.next.resize(fan_in, 0.0);
                for o in 0..fan_out {
                    let d = s.delta[o];
                    for (n, wi) in s.next.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *n += wi * d;
                    }
                }
                for (n, a) in s.next.iter_mut().zip(input) {
                    *n *= 1.0 - a * a;
                }
                std::mem::swap(&mut s.delta, &mut s.next);
            }
        }
    }
}

fn quadratic_loss(centers: &[ParamVector], params: &[f64]) -> f64 {
    centers
        .iter()
        .map(|c| 0.5 * params.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

fn quadratic_gradient(centers: &[ParamVector], params: &[f64]) -> ParamVector {
    let mut g = vec![0.0; params.len()];
    for c in centers {
        for ((gi, p), ci) in g.iter_mut().zip(params).zip(c.iter()) {
            *gi += p - ci;
        }
    }
    ParamVector(g)
}

/// Dataset loss. Quadratic models ignore `data` and `agg`.
pub fn loss(spec: &ModelSpec, params: &[f64], data: &Dataset, agg: Aggregation) -> Result<f64> {
    check_params(spec, params)?;
    if let ModelSpec::Quadratic { centers } = spec {
        return Ok(quadratic_loss(centers, params));
    }
    check_data(spec, data)?;
    let net = Network::new(spec, params);
    let total = chunk_losses(&net, data);
    Ok(match agg {
        Aggregation::Sum => total,
        Aggregation::Mean => total / data.len() as f64,
    })
}

fn chunk_losses(net: &Network<'_>, data: &Dataset) -> f64 {
    let n = data.len();
    let chunks = n.div_ceil(exec::CHUNK);
    exec::map_indexed(chunks, |c| {
        let mut s = net.scratch();
        let end = ((c + 1) * exec::CHUNK).min(n);
        (c * exec::CHUNK..end)
            .map(|i| net.record_loss(data.row(i), data.label(i), &mut s, None))
            .sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Dataset gradient under the given aggregation.
pub fn gradient(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    agg: Aggregation,
) -> Result<ParamVector> {
    check_params(spec, params)?;
    if let ModelSpec::Quadratic { centers } = spec {
        return Ok(quadratic_gradient(centers, params));
    }
    check_data(spec, data)?;
    let scale = match agg {
        Aggregation::Sum => 1.0,
        Aggregation::Mean => 1.0 / data.len() as f64,
    };
    let indices: Vec<usize> = (0..data.len()).collect();
    Ok(subset_gradient(spec, params, data, &indices, scale))
}

/// Mean gradient over the records at `indices` (a mini-batch).
pub fn batch_gradient(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    indices: &[usize],
) -> Result<ParamVector> {
    check_params(spec, params)?;
    if let ModelSpec::Quadratic { centers } = spec {
        return Ok(quadratic_gradient(centers, params));
    }
    check_data(spec, data)?;
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(subset_gradient(
        spec,
        params,
        data,
        indices,
        1.0 / indices.len() as f64,
    ))
}

fn subset_gradient(
    spec: &ModelSpec,
    params: &[f64],
    data: &Dataset,
    indices: &[usize],
    scale: f64,
) -> ParamVector {
    let net = Network::new(spec, params);
    let n = indices.len();
    let chunks = n.div_ceil(exec::CHUNK);
    let partials = exec::map_indexed(chunks, |c| {
        let mut s = net.scratch();
        let mut g = vec![0.0; params.len()];
        let end = ((c + 1) * exec::CHUNK).min(n);
        for &i in &indices[c * exec::CHUNK..end] {
            net.record_loss(data.row(i), data.label(i), &mut s, Some((&mut g, scale)));
        }
        g
    });
    let mut total = vec![0.0; params.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    ParamVector(total)
}

/// Index of the largest class score, ties toward the smallest index.
pub fn predict(spec: &ModelSpec, params: &[f64], x: &[f64]) -> Result<usize> {
    check_params(spec, params)?;
    if !spec.is_classifier() {
        return Err(Error::NotClassification);
    }
    let net = Network::new(spec, params);
    let mut s = net.scratch();
    Ok(argmax(net.forward(x, &mut s)))
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of records whose predicted class equals the label.
pub fn accuracy(spec: &ModelSpec, params: &[f64], data: &Dataset) -> Result<f64> {
    if !spec.is_classifier() {
        return Err(Error::NotClassification);
    }
    check_params(spec, params)?;
    check_data(spec, data)?;
    let net = Network::new(spec, params);
    let n = data.len();
    let chunks = n.div_ceil(exec::CHUNK);
    let correct: usize = exec::map_indexed(chunks, |c| {
        let mut s = net.scratch();
        let end = ((c + 1) * exec::CHUNK).min(n);
        (c * exec::CHUNK..end)
            .filter(|&i| argmax(net.forward(data.row(i), &mut s)) == data.label(i))
            .count()
    })
    .into_iter()
    .sum();
    Ok(correct as f64 / n as f64)
}

/// Softmax class probabilities at `x`.
pub fn class_probabilities(spec: &ModelSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    if !spec.is_classifier() {
        return Err(Error::NotClassification);
    }
    if x.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            found: x.len(),
        });
    }
    let net = Network::new(spec, params);
    let mut s = net.scratch();
    Ok(softmax(net.forward(x, &mut s)))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log π(class | x)` and its gradient with respect to the parameters.
pub fn log_prob_and_grad(
    spec: &ModelSpec,
    params: &[f64],
    x: &[f64],
    class: usize,
) -> Result<(f64, ParamVector)> {
    check_params(spec, params)?;
    if !spec.is_classifier() {
        return Err(Error::NotClassification);
    }
    let net = Network::new(spec, params);
    let mut s = net.scratch();
    let mut g = vec![0.0; params.len()];
    // log π = −cross-entropy, so the gradient is the negated CE gradient.
    let ce = net.record_loss(x, class, &mut s, Some((&mut g, -1.0)));
    Ok((-ce, ParamVector(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binary_symmetric() -> Dataset {
        Dataset::from_rows(
            2,
            &[
                (vec![1.0, 2.0], 0),
                (vec![-1.0, -2.0], 0),
                (vec![3.0, -1.0], 1),
                (vec![-3.0, 1.0], 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn init_params_shapes() {
        let logistic = ModelSpec::logistic(2, 2);
        assert_eq!(init_params(&logistic, 7), ParamVector::zeros(6));

        let quad = ModelSpec::quadratic(vec![1.0, 2.0]);
        assert_eq!(init_params(&quad, 0).into_inner(), vec![0.0, 0.0]);

        let mlp = ModelSpec::mlp(4, vec![4], 2);
        let p = init_params(&mlp, 1);
        assert_eq!(p.len(), 30);
        let bound1 = (6.0f64 / 8.0).sqrt();
        let bound2 = (6.0f64 / 6.0).sqrt();
        assert!(p[..16].iter().all(|w| w.abs() <= bound1));
        assert!(p[16..20].iter().all(|&b| b == 0.0));
        assert!(p[20..28].iter().all(|w| w.abs() <= bound2));
        assert!(p[28..30].iter().all(|&b| b == 0.0));
        assert_eq!(p, init_params(&mlp, 1));
        assert_ne!(p, init_params(&mlp, 2));
    }

    #[test]
    fn quadratic_loss_and_gradient() {
        let spec = ModelSpec::quadratic(vec![1.0, -1.25]);
        let empty = Dataset::empty(2);
        assert_eq!(loss(&spec, &[1.0, -1.25], &empty, Aggregation::Sum).unwrap(), 0.0);
        let g = gradient(&spec, &[3.0, 0.0], &empty, Aggregation::Sum).unwrap();
        assert_eq!(g.into_inner(), vec![2.0, 1.25]);
        assert_eq!(loss(&spec, &[3.0, 0.0], &empty, Aggregation::Mean).unwrap(), 0.5 * (4.0 + 1.5625));
    }

    #[test]
    fn logistic_zero_params_is_ln2() {
        let spec = ModelSpec::logistic(2, 2);
        let data = binary_symmetric();
        let l = loss(&spec, &[0.0; 6], &data, Aggregation::Mean).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
        let s = loss(&spec, &[0.0; 6], &data, Aggregation::Sum).unwrap();
        assert_abs_diff_eq!(s, 4.0 * std::f64::consts::LN_2, epsilon = 1e-14);
    }

    #[test]
    fn logistic_single_record_hand_value() {
        // class 0 weight/bias zero, class 1 weight 1, bias 0; x = 2, y = 1
        let spec = ModelSpec::logistic(1, 2);
        let data = Dataset::from_rows(1, &[(vec![2.0], 1)]).unwrap();
        let l = loss(&spec, &[0.0, 1.0, 0.0, 0.0], &data, Aggregation::Mean).unwrap();
        assert_abs_diff_eq!(l, (1.0 + (-2.0f64).exp()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.1269, epsilon = 1e-4);
    }

    #[test]
    fn symmetric_data_gives_zero_weight_gradient_at_origin() {
        let spec = ModelSpec::logistic(2, 2);
        let g = gradient(&spec, &[0.0; 6], &binary_symmetric(), Aggregation::Mean).unwrap();
        for w in &g[..4] {
            assert_abs_diff_eq!(*w, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn accuracy_tie_break_and_separable() {
        let spec = ModelSpec::logistic(1, 2);
        let data = Dataset::from_rows(1, &[(vec![-1.0], 0), (vec![1.0], 1), (vec![2.0], 1)]).unwrap();
        // θ = 0 predicts class 0 everywhere
        assert_abs_diff_eq!(accuracy(&spec, &[0.0; 4], &data).unwrap(), 1.0 / 3.0);
        // w1 = 1 separates at 0
        assert_eq!(accuracy(&spec, &[0.0, 1.0, 0.0, 0.0], &data).unwrap(), 1.0);
        let quad = ModelSpec::quadratic(vec![0.0]);
        assert!(matches!(accuracy(&quad, &[0.0], &data), Err(Error::NotClassification)));
    }

    #[test]
    fn errors() {
        let spec = ModelSpec::logistic(2, 2);
        let data = binary_symmetric();
        assert!(matches!(
            loss(&spec, &[0.0; 5], &data, Aggregation::Sum),
            Err(Error::DimensionMismatch { expected: 6, found: 5 })
        ));
        assert!(matches!(
            loss(&spec, &[0.0; 6], &Dataset::empty(2), Aggregation::Sum),
            Err(Error::EmptyDataset)
        ));
        let bad = Dataset::from_rows(2, &[(vec![0.0, 0.0], 5)]).unwrap();
        assert!(matches!(
            gradient(&spec, &[0.0; 6], &bad, Aggregation::Sum),
            Err(Error::InvalidLabel { label: 5, .. })
        ));
    }

    #[test]
    fn merge_quadratic_adds_losses() {
        let a = ModelSpec::quadratic(vec![-1.0, -1.0]);
        let b = ModelSpec::quadratic(vec![1.0, -1.25]);
        let m = a.merge(&b).unwrap();
        let e = Dataset::empty(2);
        let theta = [0.3, 0.7];
        let sum = loss(&a, &theta, &e, Aggregation::Sum).unwrap()
            + loss(&b, &theta, &e, Aggregation::Sum).unwrap();
        assert_eq!(loss(&m, &theta, &e, Aggregation::Sum).unwrap(), sum);
        assert!(ModelSpec::logistic(2, 2).merge(&ModelSpec::logistic(3, 2)).is_err());
    }

    #[test]
    fn log_prob_matches_softmax() {
        let spec = ModelSpec::mlp(4, vec![4], 2);
        let p = init_params(&spec, 3);
        let x = [0.1, -0.2, 0.03, 0.4];
        let probs = class_probabilities(&spec, &p, &x).unwrap();
        let (lp, _) = log_prob_and_grad(&spec, &p, &x, 1).unwrap();
        assert_abs_diff_eq!(lp, probs[1].ln(), epsilon = 1e-14);
    }
}
