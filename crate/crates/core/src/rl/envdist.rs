//! Distributions over cart-pole environments.

use rand::Rng as _;
use rand_distr::{Beta, Distribution};

use super::cartpole::CartPoleParams;
use crate::rng;
use crate::{Error, Result};

/// Sampled parameter values are floored here so every environment is valid.
pub const MIN_PARAMETER: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvDistribution {
    Uniform { low: f64, high: f64 },
    /// `Beta(alpha, beta)` with probability `p`, otherwise `Uniform(low, high)`.
    Mixture {
        p: f64,
        alpha: f64,
        beta: f64,
        low: f64,
        high: f64,
    },
    /// `scale · Beta(alpha, beta) + offset`.
    AffineBeta {
        scale: f64,
        alpha: f64,
        beta: f64,
        offset: f64,
    },
}

/// Which physical constant a distribution varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvParameter {
    #[default]
    PoleLength,
    ForceMagnitude,
}

impl EnvParameter {
    pub fn apply(self, value: f64) -> CartPoleParams {
        let mut p = CartPoleParams::default();
        match self {
            EnvParameter::PoleLength => p.pole_length = value,
            EnvParameter::ForceMagnitude => p.force_magnitude = value,
        }
        p
    }
}

impl EnvDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let check_range = |low: f64, high: f64| {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return bad(format!("uniform range needs low < high, got ({low}, {high})"));
            }
            Ok(())
        };
        let check_shape = |a: f64, b: f64| {
            if !(a > 0.0 && b > 0.0) {
                return bad(format!("beta shapes must be positive, got ({a}, {b})"));
            }
            Ok(())
        };
        match *self {
            EnvDistribution::Uniform { low, high } => check_range(low, high),
            EnvDistribution::Mixture {
                p,
                alpha,
                beta,
                low,
                high,
            } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("mixture probability must lie in [0, 1], got {p}"));
                }
                check_shape(alpha, beta)?;
                check_range(low, high)
            }
            EnvDistribution::AffineBeta {
                scale,
                alpha,
                beta,
                offset,
            } => {
                if !scale.is_finite() || !offset.is_finite() {
                    return bad("affine-beta scale and offset must be finite".into());
                }
                check_shape(alpha, beta)
            }
        }
    }

    /// One raw draw, before flooring.
    pub fn sample(&self, rng: &mut rng::Rng) -> f64 {
        match *self {
            EnvDistribution::Uniform { low, high } => rng.random_range(low..high),
            EnvDistribution::Mixture {
                p,
                alpha,
                beta,
                low,
                high,
            } => {
                // always consume the coin so streams stay aligned across p
                let coin: f64 = rng.random();
                if coin < p {
                    beta_draw(alpha, beta, rng)
                } else {
                    rng.random_range(low..high)
                }
            }
            EnvDistribution::AffineBeta {
                scale,
                alpha,
                beta,
                offset,
            } => scale * beta_draw(alpha, beta, rng) + offset,
        }
    }
}

fn beta_draw(alpha: f64, beta: f64, rng: &mut rng::Rng) -> f64 {
    Beta::new(alpha, beta)
        .expect("shapes validated")
        .sample(rng)
}

/// `n` pole-length environments, deterministic per seed.
pub fn sample_environments(dist: &EnvDistribution, n: usize, seed: u64) -> Result<Vec<CartPoleParams>> {
    sample_environments_for(dist, EnvParameter::PoleLength, n, seed)
}

/// `n` environments varying `parameter`; every other constant keeps its default.
pub fn sample_environments_for(
    dist: &EnvDistribution,
    parameter: EnvParameter,
    n: usize,
    seed: u64,
) -> Result<Vec<CartPoleParams>> {
    dist.validate()?;
    let mut rng = rng::rng(seed);
    Ok((0..n)
        .map(|_| parameter.apply(dist.sample(&mut rng).max(MIN_PARAMETER)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_lengths_in_range() {
        let envs = sample_environments(&EnvDistribution::Uniform { low: 4.0, high: 5.0 }, 5, 1).unwrap();
        assert_eq!(envs.len(), 5);
        for e in &envs {
            assert!((4.0..=5.0).contains(&e.pole_length));
            assert_eq!(e.force_magnitude, 10.0);
            assert_eq!(e.gravity, 9.8);
        }
    }

    #[test]
    fn mixture_with_p_zero_is_uniform() {
        let mix = EnvDistribution::Mixture {
            p: 0.0,
            alpha: 1.0,
            beta: 5.0,
            low: 2.0,
            high: 3.0,
        };
        let envs = sample_environments(&mix, 200, 9).unwrap();
        assert!(envs.iter().all(|e| (2.0..3.0).contains(&e.pole_length)));
    }

    #[test]
    fn beta_mean() {
        let d = EnvDistribution::AffineBeta {
            scale: 1.0,
            alpha: 1.0,
            beta: 5.0,
            offset: 0.0,
        };
        let mut r = rng::rng(4);
        let n = 100_000;
        let mean = (0..n).map(|_| d.sample(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 6.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn deterministic_and_floored() {
        let d = EnvDistribution::Uniform { low: -1.0, high: 0.0 };
        let a = sample_environments(&d, 4, 3).unwrap();
        assert_eq!(a, sample_environments(&d, 4, 3).unwrap());
        assert!(a.iter().all(|e| e.pole_length == MIN_PARAMETER));
    }

    #[test]
    fn force_parameterization() {
        let d = EnvDistribution::AffineBeta {
            scale: 30.0,
            alpha: 5.0,
            beta: 1.0,
            offset: 10.0,
        };
        let envs = sample_environments_for(&d, EnvParameter::ForceMagnitude, 10, 2).unwrap();
        for e in envs {
            assert!((10.0..=40.0).contains(&e.force_magnitude));
            assert_eq!(e.pole_length, 0.5);
        }
    }

    #[test]
    fn validation() {
        assert!(EnvDistribution::Uniform { low: 1.0, high: 1.0 }.validate().is_err());
        assert!(EnvDistribution::Mixture {
            p: 1.5,
            alpha: 1.0,
            beta: 1.0,
            low: 0.0,
            high: 1.0
        }
        .validate()
        .is_err());
        assert!(EnvDistribution::AffineBeta {
            scale: 1.0,
            alpha: 0.0,
            beta: 1.0,
            offset: 0.0
        }
        .validate()
        .is_err());
    }
}
