//! Softmax feed-forward policies, episode rollouts and REINFORCE estimates.

use rand::Rng as _;

use super::cartpole::{cartpole_step, Action, CartPoleParams, EnvState};
use crate::exec;
use crate::models::{ModelSpec, Network, ParamVector};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Policies are classifiers over the 4-dimensional state with one class per
/// action.
pub type PolicySpec = ModelSpec;

pub const STATE_DIM: usize = 4;
pub const NUM_ACTIONS: usize = 2;

/// `4 → hidden (tanh) → 2` softmax policy.
pub fn policy_spec(hidden: Vec<usize>) -> PolicySpec {
    ModelSpec::mlp(STATE_DIM, hidden, NUM_ACTIONS)
}

pub fn check_policy(spec: &PolicySpec, policy: &[f64]) -> Result<()> {
    spec.validate()?;
    if spec.input_dim() != STATE_DIM || spec.num_classes() != Some(NUM_ACTIONS) {
        return Err(Error::InvalidArgument(format!(
            "policy must map {STATE_DIM} state features to {NUM_ACTIONS} actions"
        )));
    }
    if policy.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            found: policy.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub action: Action,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<Step>,
    pub discounted_return: f64,
}

impl Episode {
    /// `Σ_t γ^{t−1} r_t` from the stored rewards.
    pub fn compute_return(&self, gamma: f64) -> f64 {
        discounted(self.steps.iter().map(|s| s.reward), gamma)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn discounted(rewards: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

fn sample_action(logits: &[f64], rng: &mut Rng) -> Action {
    // two-action softmax: P(right) = σ(z_1 − z_0)
    let p_right = 1.0 / (1.0 + (logits[0] - logits[1]).exp());
    let u: f64 = rng.random();
    if u < p_right {
        Action::Right
    } else {
        Action::Left
    }
}

/// Plays one episode from a random start state, sampling actions from the
/// policy.
pub fn rollout(
    policy: &[f64],
    spec: &PolicySpec,
    env: &CartPoleParams,
    gamma: f64,
    rng: &mut Rng,
) -> Result<Episode> {
    check_policy(spec, policy)?;
    env.validate()?;
    Ok(rollout_unchecked(&Network::new(spec, policy), env, gamma, rng))
}

fn rollout_unchecked(net: &Network<'_>, env: &CartPoleParams, gamma: f64, rng: &mut Rng) -> Episode {
    let mut scratch = net.scratch();
    let mut state = EnvState::random_start(rng);
    let mut steps = Vec::new();
    loop {
        let action = sample_action(net.forward(&state.features(), &mut scratch), rng);
        let (next, reward, done) = cartpole_step(env, &state, action, steps.len());
        steps.push(Step {
            state,
            action,
            reward,
        });
        if done {
            break;
        }
        state = next;
    }
    let discounted_return = discounted(steps.iter().map(|s| s.reward), gamma);
    Episode {
        steps,
        discounted_return,
    }
}

/// Discounted return of one episode, without recording the trajectory.
fn play_return(net: &Network<'_>, env: &CartPoleParams, gamma: f64, rng: &mut Rng) -> f64 {
    let mut scratch = net.scratch();
    let mut state = EnvState::random_start(rng);
    let (mut total, mut weight, mut t) = (0.0, 1.0, 0);
    loop {
        let action = sample_action(net.forward(&state.features(), &mut scratch), rng);
        let (next, reward, done) = cartpole_step(env, &state, action, t);
        total += weight * reward;
        weight *= gamma;
        t += 1;
        if done {
            return total;
        }
        state = next;
    }
}

/// `count` episodes; episode `i` plays `envs[i mod |envs|]` with the stream
/// `derive(seed, [i])`. Episodes run concurrently and are returned in index
/// order.
pub fn rollout_batch(
    policy: &[f64],
    spec: &PolicySpec,
    envs: &[CartPoleParams],
    count: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<Episode>> {
    check_policy(spec, policy)?;
    if envs.is_empty() {
        return Err(Error::InvalidArgument("rollout batch needs at least one environment".into()));
    }
    for e in envs {
        e.validate()?;
    }
    let net = Network::new(spec, policy);
    Ok(exec::map_indexed(count, |i| {
        let mut rng = rng::rng_for(seed, &[i as u64]);
        rollout_unchecked(&net, &envs[i % envs.len()], gamma, &mut rng)
    }))
}

/// REINFORCE ascent direction: the batch mean of `R(τ) Σ_t ∇ log π(a_t|s_t)`.
pub fn pg_gradient(policy: &[f64], spec: &PolicySpec, episodes: &[Episode]) -> Result<ParamVector> {
    check_policy(spec, policy)?;
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let net = Network::new(spec, policy);
    let n = policy.len();
    let scale = 1.0 / episodes.len() as f64;
    let parts = exec::map_slice(episodes, |ep| {
        let mut g = vec![0.0; n];
        if ep.discounted_return != 0.0 {
            let mut s = net.scratch();
            // ∇ log π = −∇ cross-entropy
            let w = -ep.discounted_return * scale;
            for step in &ep.steps {
                net.record_loss(&step.state.features(), step.action.index(), &mut s, Some((&mut g, w)));
            }
        }
        g
    });
    let mut total = ParamVector::zeros(n);
    for g in &parts {
        total.axpy(1.0, g);
    }
    Ok(total)
}

/// `Σ_t log π(a_t|s_t)` over one episode.
pub fn episode_log_prob(policy: &[f64], spec: &PolicySpec, episode: &Episode) -> Result<f64> {
    check_policy(spec, policy)?;
    let net = Network::new(spec, policy);
    let mut s = net.scratch();
    Ok(episode
        .steps
        .iter()
        .map(|step| -net.record_loss(&step.state.features(), step.action.index(), &mut s, None))
        .sum())
}

/// Sum over `envs` of each environment's mean return over `episodes`
/// rollouts. Rollout `k` of every environment uses the stream
/// `derive(seed, [k])`, so identical environments get identical estimates
/// and the estimate of a union of sets is the sum of the estimates.
pub fn estimate_j(
    policy: &[f64],
    spec: &PolicySpec,
    envs: &[CartPoleParams],
    gamma: f64,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    check_policy(spec, policy)?;
    if envs.is_empty() {
        return Ok(0.0);
    }
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes per environment must be positive".into()));
    }
    for e in envs {
        e.validate()?;
    }
    let net = Network::new(spec, policy);
    let returns = exec::map_indexed(envs.len() * episodes, |i| {
        let (j, k) = (i / episodes, i % episodes);
        let mut rng = rng::rng_for(seed, &[k as u64]);
        play_return(&net, &envs[j], gamma, &mut rng)
    });
    Ok(returns
        .chunks(episodes)
        .map(|r| r.iter().sum::<f64>() / episodes as f64)
        .sum())
}
