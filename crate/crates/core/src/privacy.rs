//! Gaussian gradient perturbation and strong-composition accounting.
//!
//! Only gradients are perturbed. The full-dataset loss values that parties
//! exchange are sent as-is and are not covered by the accountant.

use rand_distr::{Distribution, StandardNormal};

use crate::models::ParamVector;
use crate::rng::Rng;
use crate::{Error, Result};

/// Per-step privacy budget and clipping norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub delta: f64,
    pub clip_norm: f64,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        PrivacySpec {
            epsilon,
            delta,
            clip_norm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0, 1)".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip_norm must be positive".into()));
        }
        Ok(())
    }

    /// Per-coordinate noise variance `2 ε⁻² ln(1/δ)`.
    pub fn noise_variance(&self) -> f64 {
        2.0 * (1.0 / self.delta).ln() / (self.epsilon * self.epsilon)
    }
}

/// Rescales `grad` to norm at most `clip_norm`.
pub fn clip(grad: &[f64], clip_norm: f64) -> ParamVector {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    ParamVector::new(grad.iter().map(|g| g * scale).collect())
}

/// Clips `grad` and adds i.i.d. `N(0, σ²)` noise to each coordinate.
pub fn dp_perturb(grad: &[f64], spec: &PrivacySpec, rng: &mut Rng) -> ParamVector {
    let sigma = spec.noise_variance().sqrt();
    let mut out = clip(grad, spec.clip_norm);
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionResult {
    pub eps_prime: f64,
    pub delta_prime: f64,
}

/// Strong composition over `steps` noisy steps with batch fraction `q`:
/// `ε' = 2qε√(T ln(1/δ))`, `δ' = qTδ`.
pub fn compose(spec: &PrivacySpec, steps: u64, batch_fraction: f64) -> Result<CompositionResult> {
    if !(batch_fraction > 0.0 && batch_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "batch fraction must lie in (0, 1], got {batch_fraction}"
        )));
    }
    let t = steps as f64;
    Ok(CompositionResult {
        eps_prime: 2.0 * batch_fraction * spec.epsilon * (t * (1.0 / spec.delta).ln()).sqrt(),
        delta_prime: batch_fraction * t * spec.delta,
    })
}
