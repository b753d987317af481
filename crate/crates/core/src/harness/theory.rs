//! Checks of the convergence guarantees: the full-batch monotonicity of the
//! round outputs and the stationarity bound on a pair of quadratics.

use std::fmt;

use crate::models::{Dataset, ModelSpec, ParamVector};
use crate::protocol::{
    run_assist_sgd_from, AssistConfig, AssistRun, BatchSize, IterSplit, LearningRate, Participant, Party,
};
use crate::Result;

/// Slack allowed for floating-point round-off in loss comparisons.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum MonotonicityReport {
    Pass,
    /// First round whose loss exceeds the previous one by more than the
    /// tolerance.
    Fail { round: usize, before: f64, after: f64 },
    /// Stochastic runs carry no guarantee.
    NotApplicable,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        !matches!(self, MonotonicityReport::Fail { .. })
    }
}

impl fmt::Display for MonotonicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonotonicityReport::Pass => f.write_str("pass"),
            MonotonicityReport::Fail { round, before, after } => {
                write!(f, "fail at round {round}: {after} > {before}")
            }
            MonotonicityReport::NotApplicable => f.write_str("not applicable (mini-batch run)"),
        }
    }
}

/// Checks `losses[r] ≤ losses[r−1] + 1e-12` for a history whose entry `r`
/// is the global loss after round `r`.
pub fn verify_monotonicity(losses: &[f64], full_batch: bool) -> MonotonicityReport {
    if !full_batch {
        return MonotonicityReport::NotApplicable;
    }
    for (r, w) in losses.windows(2).enumerate() {
        if w[1] > w[0] + MONOTONE_TOLERANCE {
            return MonotonicityReport::Fail {
                round: r + 1,
                before: w[0],
                after: w[1],
            };
        }
    }
    MonotonicityReport::Pass
}

pub fn verify_run_monotonicity(run: &AssistRun) -> MonotonicityReport {
    verify_monotonicity(&run.global_losses(), run.full_batch)
}

/// First round violating `f(θ^r) ≤ f(θ_0^P) ≤ f(θ^{r−1})`, if any.
pub fn chain_violation(run: &AssistRun) -> Option<usize> {
    let losses = run.global_losses();
    run.rounds.iter().find_map(|o| {
        let rec = &o.record;
        let prev = losses[rec.round - 1];
        let ok = rec.global_loss_after <= rec.provider_init_loss + MONOTONE_TOLERANCE
            && rec.provider_init_loss <= prev + MONOTONE_TOLERANCE;
        (!ok).then_some(rec.round)
    })
}

/// Step size `√(δ₀ / (3 R L T G²))`.
pub fn theorem_eta(rounds: f64, smoothness: f64, local_iters: f64, grad_bound: f64, delta0: f64) -> f64 {
    (delta0 / (3.0 * rounds * smoothness * local_iters * grad_bound * grad_bound)).sqrt()
}

/// Bound `√(12 L T G² δ₀ / R)` on `min_r ‖∇f(θ^r)‖²`.
pub fn theorem_bound(rounds: f64, smoothness: f64, local_iters: f64, grad_bound: f64, delta0: f64) -> f64 {
    (12.0 * smoothness * local_iters * grad_bound * grad_bound * delta0 / rounds).sqrt()
}

/// `f(θ) = ½‖θ − c_L‖² + ½‖θ − c_P‖²` split between the two parties.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPair {
    pub learner: Vec<f64>,
    pub provider: Vec<f64>,
}

impl QuadraticPair {
    pub fn participants(&self) -> Result<(Participant, Participant)> {
        let d = self.learner.len();
        Ok((
            Participant::new(Party::Learner, ModelSpec::quadratic(self.learner.clone()), Dataset::empty(d))?,
            Participant::new(Party::Provider, ModelSpec::quadratic(self.provider.clone()), Dataset::empty(d))?,
        ))
    }

    /// Lipschitz constant of ∇f (Hessian 2I).
    pub fn smoothness(&self) -> f64 {
        2.0
    }

    /// `inf f = ¼‖c_L − c_P‖²`, attained at the midpoint.
    pub fn infimum(&self) -> f64 {
        0.25 * sq_dist(&self.learner, &self.provider)
    }

    pub fn minimizer(&self) -> Vec<f64> {
        self.learner.iter().zip(&self.provider).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * sq_dist(theta, &self.learner) + 0.5 * sq_dist(theta, &self.provider)
    }

    /// Norms of the learner, provider and global gradients at `theta`.
    pub fn gradient_norms(&self, theta: &[f64]) -> (f64, f64, f64) {
        let gl = sq_dist(theta, &self.learner).sqrt();
        let gp = sq_dist(theta, &self.provider).sqrt();
        let g = self.global_gradient_sq(theta).sqrt();
        (gl, gp, g)
    }

    /// `‖∇f(θ)‖² = ‖2θ − c_L − c_P‖²`.
    pub fn global_gradient_sq(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(self.learner.iter().zip(&self.provider))
            .map(|(t, (a, b))| {
                let g = 2.0 * t - a - b;
                g * g
            })
            .sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub rounds: usize,
    pub local_iters: usize,
    pub eta: f64,
    pub smoothness: f64,
    pub grad_bound: f64,
    pub delta0: f64,
    /// `‖∇f(θ^r)‖²` for `r = 0..=R`.
    pub grad_sq: Vec<f64>,
    /// `min_{0 ≤ r < R} ‖∇f(θ^r)‖²`.
    pub min_grad_sq: f64,
    pub bound: f64,
    pub run: AssistRun,
}

impl StationarityReport {
    pub fn passed(&self) -> bool {
        self.min_grad_sq <= self.bound
    }
}

impl fmt::Display for StationarityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R={} T={} eta={:.6e} L={} G={:.6} delta0={:.6}: min ||grad f||^2 = {:.6e} {} bound {:.6e}",
            self.rounds,
            self.local_iters,
            self.eta,
            self.smoothness,
            self.grad_bound,
            self.delta0,
            self.min_grad_sq,
            if self.passed() { "<=" } else { ">" },
            self.bound,
        )
    }
}

/// Largest learner, provider or global gradient norm over every iterate the
/// run produced.
fn realized_grad_bound(pair: &QuadraticPair, run: &AssistRun) -> f64 {
    let mut g: f64 = 0.0;
    let mut visit = |theta: &ParamVector| {
        let (a, b, c) = pair.gradient_norms(theta);
        g = g.max(a).max(b).max(c);
    };
    visit(&run.initial_params);
    for o in &run.rounds {
        for c in o.learner_packet.checkpoints().iter().chain(o.provider_packet.checkpoints()) {
            visit(&c.params);
        }
    }
    g
}

/// Runs full-batch AssistGD on `pair` from `θ⁰ = 0` with `T` local
/// iterations per party and `eta_scale` times the theorem step size, then
/// compares the smallest squared gradient norm with the bound.
///
/// `G` must bound every gradient along the run, but the run depends on `G`
/// through η. Starting from the gradient norms at `θ⁰`, `G` is raised to the
/// realized maximum and the run repeated until the realized maximum no longer
/// exceeds it.
pub fn verify_stationarity(
    pair: &QuadraticPair,
    rounds: usize,
    local_iters: usize,
    eta_scale: f64,
) -> Result<StationarityReport> {
    let (learner, provider) = pair.participants()?;
    let theta0 = ParamVector::zeros(pair.learner.len());
    let l = pair.smoothness();
    let delta0 = pair.loss(&theta0) - pair.infimum();
    let (a, b, c) = pair.gradient_norms(&theta0);
    let mut g = a.max(b).max(c);
    let mut attempts = 0;
    loop {
        let eta = eta_scale * theorem_eta(rounds as f64, l, local_iters as f64, g, delta0);
        let config = AssistConfig {
            rounds,
            total_local_iters: 2 * local_iters,
            split: IterSplit::Explicit {
                learner: local_iters,
                provider: local_iters,
            },
            eta: LearningRate::constant(if eta > 0.0 { eta } else { f64::MIN_POSITIVE }),
            sample_period: 1,
            batch_size: BatchSize::Full,
            seed: 0,
            privacy: None,
        };
        let run = run_assist_sgd_from(theta0.clone(), &config, &learner, &provider, None)?;
        let realized = realized_grad_bound(pair, &run);
        attempts += 1;
        if realized <= g || attempts >= 100 {
            let grad_sq: Vec<f64> = run.round_params().iter().map(|t| pair.global_gradient_sq(t)).collect();
            let min_grad_sq = grad_sq[..rounds].iter().cloned().fold(f64::INFINITY, f64::min);
            return Ok(StationarityReport {
                rounds,
                local_iters,
                eta,
                smoothness: l,
                grad_bound: g,
                delta0,
                min_grad_sq,
                bound: theorem_bound(rounds as f64, l, local_iters as f64, g, delta0),
                grad_sq,
                run,
            });
        }
        g = realized;
    }
}
