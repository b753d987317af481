//! Cart-pole with a configurable pole, integrated with explicit Euler steps.

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    /// Half the pole length.
    pub pole_length: f64,
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub force_magnitude: f64,
    /// Integration step in seconds.
    pub tau: f64,
    /// Episode fails once |θ| exceeds this (radians).
    pub angle_threshold: f64,
    /// Episode fails once |x| exceeds this.
    pub position_threshold: f64,
    pub max_steps: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            pole_length: 0.5,
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            force_magnitude: 10.0,
            tau: 0.02,
            angle_threshold: 12.0f64.to_radians(),
            position_threshold: 2.4,
            max_steps: 200,
        }
    }
}

impl CartPoleParams {
    pub fn with_pole_length(pole_length: f64) -> Self {
        CartPoleParams {
            pole_length,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pole_length", self.pole_length),
            ("gravity", self.gravity),
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("force_magnitude", self.force_magnitude),
            ("tau", self.tau),
            ("angle_threshold", self.angle_threshold),
            ("position_threshold", self.position_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl EnvState {
    pub fn features(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// Each component uniform in [−0.05, 0.05].
    pub fn random_start(rng: &mut Rng) -> Self {
        let mut u = || rng.random_range(-0.05..0.05);
        EnvState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Left
        } else {
            Action::Right
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }
}

/// State after one Euler step under `action`.
pub fn dynamics(p: &CartPoleParams, s: &EnvState, action: Action) -> EnvState {
    let force = match action {
        Action::Left => -p.force_magnitude,
        Action::Right => p.force_magnitude,
    };
    let total_mass = p.cart_mass + p.pole_mass;
    let polemass_length = p.pole_mass * p.pole_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (p.gravity * sin - cos * temp)
        / (p.pole_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
    EnvState {
        x: s.x + p.tau * s.x_dot,
        x_dot: s.x_dot + p.tau * x_acc,
        theta: s.theta + p.tau * s.theta_dot,
        theta_dot: s.theta_dot + p.tau * theta_acc,
    }
}

/// One environment step. `steps_taken` counts steps before this one. Every
/// step, including the terminating one, earns reward 1. The episode ends when
/// the pole or cart leaves its bounds or the step limit is reached.
pub fn cartpole_step(
    p: &CartPoleParams,
    s: &EnvState,
    action: Action,
    steps_taken: usize,
) -> (EnvState, f64, bool) {
    let next = dynamics(p, s, action);
    let failed = next.x.abs() > p.position_threshold
        || next.theta.abs() > p.angle_threshold
        || !next.theta.is_finite()
        || !next.x.is_finite();
    let done = failed || steps_taken + 1 >= p.max_steps;
    (next, 1.0, done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_matches_hand_integration() {
        let p = CartPoleParams::default();
        let s = EnvState {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.05,
            theta_dot: 0.0,
        };
        let (next, r, done) = cartpole_step(&p, &s, Action::Right, 0);
        // Hand-evaluated: θ̇ = 0 so the centripetal term vanishes.
        let m = 1.1;
        let temp = 10.0 / m;
        let (sn, cs) = (0.05f64.sin(), 0.05f64.cos());
        let th_acc = (9.8 * sn - cs * temp) / (0.5 * (4.0 / 3.0 - 0.1 * cs * cs / m));
        let x_acc = temp - 0.05 * th_acc * cs / m;
        assert!((next.x - 0.0).abs() <= 1e-12);
        assert!((next.x_dot - 0.02 * x_acc).abs() <= 1e-12);
        assert!((next.theta - 0.05).abs() <= 1e-12);
        assert!((next.theta_dot - 0.02 * th_acc).abs() <= 1e-12);
        assert_eq!(r, 1.0);
        assert!(!done);
    }

    #[test]
    fn beyond_angle_threshold_terminates_with_reward() {
        let p = CartPoleParams::default();
        let s = EnvState {
            theta: p.angle_threshold + 1e-9,
            theta_dot: 0.1,
            ..Default::default()
        };
        let (_, r, done) = cartpole_step(&p, &s, Action::Left, 0);
        assert!(done);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn step_limit_terminates() {
        let p = CartPoleParams {
            max_steps: 3,
            ..Default::default()
        };
        let s = EnvState::default();
        assert!(!cartpole_step(&p, &s, Action::Left, 1).2);
        assert!(cartpole_step(&p, &s, Action::Left, 2).2);
    }

    #[test]
    fn zero_gravity_alternating_forces_do_not_keep_the_pole_upright() {
        // Pushing the cart tilts the pole even without gravity, so θ leaves 0.
        let p = CartPoleParams {
            gravity: 0.0,
            ..Default::default()
        };
        let s1 = dynamics(&p, &EnvState::default(), Action::Right);
        assert_eq!(s1.theta, 0.0);
        assert!(s1.theta_dot < 0.0);
        let s2 = dynamics(&p, &s1, Action::Left);
        assert!(s2.theta < 0.0);
    }

    #[test]
    fn mirrored_state_and_action_give_mirrored_trajectory() {
        let p = CartPoleParams::with_pole_length(1.3);
        let mut a = EnvState {
            x: 0.1,
            x_dot: -0.2,
            theta: 0.03,
            theta_dot: 0.4,
        };
        let mut b = EnvState {
            x: -a.x,
            x_dot: -a.x_dot,
            theta: -a.theta,
            theta_dot: -a.theta_dot,
        };
        for t in 0..40 {
            let (act, mirror) = if t % 3 == 0 {
                (Action::Right, Action::Left)
            } else {
                (Action::Left, Action::Right)
            };
            a = dynamics(&p, &a, act);
            b = dynamics(&p, &b, mirror);
            assert_eq!(a.x, -b.x);
            assert_eq!(a.x_dot, -b.x_dot);
            assert_eq!(a.theta, -b.theta);
            assert_eq!(a.theta_dot, -b.theta_dot);
        }
    }

    #[test]
    fn params_validation() {
        assert!(CartPoleParams::default().validate().is_ok());
        assert!(CartPoleParams::with_pole_length(0.0).validate().is_err());
        assert!(CartPoleParams {
            max_steps: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
