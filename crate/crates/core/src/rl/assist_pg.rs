//! Trajectory-exchange policy gradient (AssistPG) and its PG baselines.
//!
//! The round structure is the one of [`crate::protocol`] with losses
//! replaced by estimated returns: checkpoints carry the sender's summed
//! return estimate `Σ_{β ∈ own set} Ĵ_β(θ_t)` in
//! [`Checkpoint::local_loss`], and the receiver keeps the checkpoint with the
//! *largest* global estimate.
//!
//! All return estimates made in round `r` share one evaluation stream, so
//! both parties and every baseline score a policy on the same episode seeds.

use std::time::Instant;

use super::cartpole::CartPoleParams;
use super::envdist::{sample_environments, EnvDistribution};
use super::policy::{check_policy, estimate_j, pg_gradient, rollout_batch, PolicySpec};
use crate::baselines::{average, fedavg_weights, History};
use crate::models::{self, ParamVector};
use crate::protocol::{checkpoint_indices, Checkpoint, HistoryPoint, Party, TrajectoryPacket};
use crate::rng::{self, tag};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RLAssistConfig {
    pub rounds: usize,
    /// PG iterations each party runs per round.
    pub local_iters: usize,
    pub eta: f64,
    /// Episodes per gradient estimate.
    pub batch_size: usize,
    pub sample_period: usize,
    pub gamma: f64,
    /// Rollouts per environment when estimating returns.
    pub eval_episodes: usize,
    pub learner_envs: Vec<CartPoleParams>,
    pub provider_envs: Vec<CartPoleParams>,
    pub seed: u64,
}

impl Default for RLAssistConfig {
    fn default() -> Self {
        RLAssistConfig::standard(0).expect("standard distributions are valid")
    }
}

impl RLAssistConfig {
    /// Five learner environments with pole length ~ Uniform(4, 5) and five
    /// provider environments ~ Uniform(0, 1), drawn from `seed`.
    pub fn standard(seed: u64) -> Result<Self> {
        Ok(RLAssistConfig {
            rounds: 10,
            local_iters: 20,
            eta: 5e-3,
            batch_size: 32,
            sample_period: 4,
            gamma: 0.99,
            eval_episodes: 32,
            learner_envs: sample_environments(
                &EnvDistribution::Uniform { low: 4.0, high: 5.0 },
                5,
                rng::derive(seed, &[tag::ENVS, tag::LEARNER]),
            )?,
            provider_envs: sample_environments(
                &EnvDistribution::Uniform { low: 0.0, high: 1.0 },
                5,
                rng::derive(seed, &[tag::ENVS, tag::PROVIDER]),
            )?,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rounds", self.rounds),
            ("batch_size", self.batch_size),
            ("sample_period", self.sample_period),
            ("eval_episodes", self.eval_episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config {
                    field: name.into(),
                    message: "must be at least 1".into(),
                });
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config {
                field: "eta".into(),
                message: format!("must be positive, got {}", self.eta),
            });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config {
                field: "gamma".into(),
                message: format!("must lie in (0, 1], got {}", self.gamma),
            });
        }
        for (name, envs) in [("learner_envs", &self.learner_envs), ("provider_envs", &self.provider_envs)] {
            if envs.is_empty() {
                return Err(Error::Config {
                    field: name.into(),
                    message: "needs at least one environment".into(),
                });
            }
            for e in envs {
                e.validate()?;
            }
        }
        Ok(())
    }

    pub fn all_envs(&self) -> Vec<CartPoleParams> {
        self.learner_envs.iter().chain(&self.provider_envs).copied().collect()
    }

    fn envs(&self, party: Party) -> &[CartPoleParams] {
        match party {
            Party::Learner => &self.learner_envs,
            Party::Provider => &self.provider_envs,
        }
    }

    /// Evaluation stream shared by every estimate made in `round`.
    fn eval_seed(&self, round: usize) -> u64 {
        rng::derive(self.seed, &[tag::EVAL, round as u64])
    }
}

/// Held-out environments. Returns on them are undiscounted.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSets {
    pub test_i: Vec<CartPoleParams>,
    pub test_ii: Vec<CartPoleParams>,
    pub episodes: usize,
}

impl TestSets {
    /// Ten pole lengths ~ Uniform(0, 5) and ten from `Beta(1, 5)` with
    /// probability 0.2, else Uniform(0, 5).
    pub fn standard(seed: u64, episodes: usize) -> Result<Self> {
        Ok(TestSets {
            test_i: sample_environments(
                &EnvDistribution::Uniform { low: 0.0, high: 5.0 },
                10,
                rng::derive(seed, &[tag::ENVS, tag::TEST_I]),
            )?,
            test_ii: sample_environments(
                &EnvDistribution::Mixture {
                    p: 0.2,
                    alpha: 1.0,
                    beta: 5.0,
                    low: 0.0,
                    high: 5.0,
                },
                10,
                rng::derive(seed, &[tag::ENVS, tag::TEST_II]),
            )?,
            episodes,
        })
    }

    /// Mean undiscounted return per environment on each set.
    pub fn evaluate(&self, policy: &[f64], spec: &PolicySpec, seed: u64, round: usize) -> Result<(f64, f64)> {
        let mean = |envs: &[CartPoleParams], t: u64| -> Result<f64> {
            if envs.is_empty() {
                return Ok(0.0);
            }
            let s = rng::derive(seed, &[tag::EVAL, t, round as u64]);
            Ok(estimate_j(policy, spec, envs, 1.0, self.episodes, s)? / envs.len() as f64)
        };
        Ok((mean(&self.test_i, tag::TEST_I)?, mean(&self.test_ii, tag::TEST_II)?))
    }
}

/// Runs `iters` REINFORCE ascent steps on `envs` from `start`. Checkpoint
/// `local_loss` fields hold `Σ_{β ∈ envs} Ĵ_β`.
#[allow(clippy::too_many_arguments)]
pub fn local_pg(
    spec: &PolicySpec,
    start: &ParamVector,
    envs: &[CartPoleParams],
    config: &RLAssistConfig,
    iters: usize,
    party: Party,
    round: usize,
    train_seed: u64,
) -> Result<TrajectoryPacket> {
    check_policy(spec, start)?;
    let eval_seed = config.eval_seed(round);
    let indices = checkpoint_indices(iters, config.sample_period);
    let mut next = indices.iter().peekable();
    let mut theta = start.clone();
    let mut checkpoints = Vec::with_capacity(indices.len());
    for t in 0..=iters {
        if next.peek() == Some(&&t) {
            next.next();
            checkpoints.push(Checkpoint {
                iter_index: t,
                params: theta.clone(),
                local_loss: estimate_j(&theta, spec, envs, config.gamma, config.eval_episodes, eval_seed)?,
            });
        }
        if t == iters {
            break;
        }
        let episodes = rollout_batch(
            &theta,
            spec,
            envs,
            config.batch_size,
            config.gamma,
            rng::derive(train_seed, &[t as u64]),
        )?;
        let g = pg_gradient(&theta, spec, &episodes)?;
        theta.axpy(config.eta, &g);
        if !theta.is_finite() {
            return Err(Error::Divergence {
                party: party.to_string(),
                iteration: t + 1,
            });
        }
    }
    TrajectoryPacket::new(party, round, checkpoints)
}

/// Position of the largest score; ties go to the earliest position.
pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Global return estimates of a received packet: transmitted estimate plus
/// the receiver's own.
pub fn score_pg_packet(
    packet: &TrajectoryPacket,
    spec: &PolicySpec,
    own_envs: &[CartPoleParams],
    config: &RLAssistConfig,
) -> Result<Vec<f64>> {
    let seed = config.eval_seed(packet.round());
    packet
        .checkpoints()
        .iter()
        .map(|c| {
            estimate_j(&c.params, spec, own_envs, config.gamma, config.eval_episodes, seed)
                .map(|own| c.local_loss + own)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgRoundRecord {
    pub round: usize,
    /// Global return estimate of the provider's starting policy.
    pub provider_init_return: f64,
    /// Global return estimate of the round output.
    pub global_return: f64,
    pub provider_init_iter: usize,
    pub selected_iter: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PgRun {
    pub initial_params: ParamVector,
    /// Round output with the largest global return estimate (ties toward
    /// earlier rounds).
    pub best: ParamVector,
    pub best_round: usize,
    pub final_params: ParamVector,
    pub rounds: Vec<PgRoundRecord>,
    /// Round 0 through round R. `train_loss` holds the mean discounted return
    /// per training environment; the test metrics hold Test I and Test II.
    pub history: Vec<HistoryPoint>,
}

fn party_seed(config: &RLAssistConfig, stream: u64, round: usize) -> u64 {
    rng::derive(config.seed, &[tag::TRAIN, stream, round as u64])
}

fn initial_policy(spec: &PolicySpec, config: &RLAssistConfig) -> ParamVector {
    models::init_params(spec, rng::derive(config.seed, &[tag::INIT]))
}

/// History entry for `policy`, scored on both training sets and the tests.
fn history_point(
    policy: &[f64],
    spec: &PolicySpec,
    config: &RLAssistConfig,
    tests: Option<&TestSets>,
    round: usize,
    global_return: Option<f64>,
    wall_ms: f64,
) -> Result<HistoryPoint> {
    let all = config.all_envs();
    let global = match global_return {
        Some(j) => j,
        None => estimate_j(policy, spec, &all, config.gamma, config.eval_episodes, config.eval_seed(round))?,
    };
    let (t1, t2) = match tests {
        Some(t) => {
            let (a, b) = t.evaluate(policy, spec, config.seed, round)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(HistoryPoint {
        round,
        train_loss: global / all.len() as f64,
        test_metric: t1,
        test_metric_2: t2,
        wall_ms,
    })
}

/// AssistPG from the standard initial policy.
pub fn run_assist_pg(config: &RLAssistConfig, spec: &PolicySpec, tests: Option<&TestSets>) -> Result<PgRun> {
    config.validate()?;
    let theta0 = initial_policy(spec, config);
    check_policy(spec, &theta0)?;
    let mut history = vec![history_point(&theta0, spec, config, tests, 0, None, 0.0)?];
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut outputs = Vec::with_capacity(config.rounds);
    let mut theta = theta0.clone();
    for r in 1..=config.rounds {
        let started = Instant::now();
        let learner_packet = local_pg(
            spec,
            &theta,
            config.envs(Party::Learner),
            config,
            config.local_iters,
            Party::Learner,
            r,
            party_seed(config, tag::LEARNER, r),
        )?;
        let scores = score_pg_packet(&learner_packet, spec, config.envs(Party::Provider), config)?;
        let k = argmax_first(&scores);
        let init = &learner_packet.checkpoints()[k];
        let provider_packet = local_pg(
            spec,
            &init.params,
            config.envs(Party::Provider),
            config,
            config.local_iters,
            Party::Provider,
            r,
            party_seed(config, tag::PROVIDER, r),
        )?;
        let back = score_pg_packet(&provider_packet, spec, config.envs(Party::Learner), config)?;
        let j = argmax_first(&back);
        let chosen = provider_packet.checkpoints()[j].clone();
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        rounds.push(PgRoundRecord {
            round: r,
            provider_init_return: scores[k],
            global_return: back[j],
            provider_init_iter: init.iter_index,
            selected_iter: chosen.iter_index,
            wall_ms,
        });
        history.push(history_point(&chosen.params, spec, config, tests, r, Some(back[j]), wall_ms)?);
        theta = chosen.params;
        outputs.push(theta.clone());
    }
    let returns: Vec<f64> = rounds.iter().map(|r| r.global_return).collect();
    let b = argmax_first(&returns);
    Ok(PgRun {
        initial_params: theta0,
        best: outputs[b].clone(),
        best_round: b + 1,
        final_params: theta,
        rounds,
        history,
    })
}

/// Plain PG on `envs`, `local_iters` iterations per reported round.
fn run_plain_pg(
    config: &RLAssistConfig,
    spec: &PolicySpec,
    envs: &[CartPoleParams],
    tests: Option<&TestSets>,
    stream: u64,
    party: Party,
) -> Result<History> {
    config.validate()?;
    let mut theta = initial_policy(spec, config);
    let mut points = vec![history_point(&theta, spec, config, tests, 0, None, 0.0)?];
    for r in 1..=config.rounds {
        let started = Instant::now();
        theta = train_endpoint(spec, &theta, envs, config, party, party_seed(config, stream, r))?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        points.push(history_point(&theta, spec, config, tests, r, None, wall_ms)?);
    }
    Ok(History {
        points,
        final_params: theta,
    })
}

/// Endpoint of `local_iters` ascent steps, without checkpoint estimates.
fn train_endpoint(
    spec: &PolicySpec,
    start: &ParamVector,
    envs: &[CartPoleParams],
    config: &RLAssistConfig,
    party: Party,
    seed: u64,
) -> Result<ParamVector> {
    let mut theta = start.clone();
    for t in 0..config.local_iters {
        let episodes = rollout_batch(&theta, spec, envs, config.batch_size, config.gamma, rng::derive(seed, &[t as u64]))?;
        let g = pg_gradient(&theta, spec, &episodes)?;
        theta.axpy(config.eta, &g);
        if !theta.is_finite() {
            return Err(Error::Divergence {
                party: party.to_string(),
                iteration: t + 1,
            });
        }
    }
    Ok(theta)
}

/// PG on the union of both parties' environments.
pub fn run_pg_centralized(config: &RLAssistConfig, spec: &PolicySpec, tests: Option<&TestSets>) -> Result<History> {
    run_plain_pg(config, spec, &config.all_envs(), tests, tag::CENTRAL, Party::Learner)
}

/// PG on the learner's environments only.
pub fn run_pg_learner_only(config: &RLAssistConfig, spec: &PolicySpec, tests: Option<&TestSets>) -> Result<History> {
    run_plain_pg(config, spec, &config.learner_envs, tests, tag::LEARNER, Party::Learner)
}

/// FedAvg with PG local updates, weighted by environment-set size.
pub fn run_pg_fedavg(config: &RLAssistConfig, spec: &PolicySpec, tests: Option<&TestSets>) -> Result<History> {
    config.validate()?;
    let (w_l, w_p) = fedavg_weights(config.learner_envs.len(), config.provider_envs.len());
    let mut theta = initial_policy(spec, config);
    let mut points = vec![history_point(&theta, spec, config, tests, 0, None, 0.0)?];
    for r in 1..=config.rounds {
        let started = Instant::now();
        let local = |party: Party| {
            train_endpoint(spec, &theta, config.envs(party), config, party, party_seed(config, party.tag(), r))
        };
        let a = local(Party::Learner)?;
        let b = local(Party::Provider)?;
        theta = average(&[(w_l, &a), (w_p, &b)]);
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        points.push(history_point(&theta, spec, config, tests, r, None, wall_ms)?);
    }
    Ok(History {
        points,
        final_params: theta,
    })
}

#[derive(Debug, Clone)]
pub struct PgBaselines {
    pub centralized: History,
    pub learner_only: History,
    pub fedavg: History,
}

pub fn run_pg_baselines(config: &RLAssistConfig, spec: &PolicySpec, tests: Option<&TestSets>) -> Result<PgBaselines> {
    Ok(PgBaselines {
        centralized: run_pg_centralized(config, spec, tests)?,
        learner_only: run_pg_learner_only(config, spec, tests)?,
        fedavg: run_pg_fedavg(config, spec, tests)?,
    })
}
