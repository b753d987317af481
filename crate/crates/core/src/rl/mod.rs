//! Parameterized cart-pole environments, softmax policies trained with
//! REINFORCE, and the policy-gradient version of the assistance protocol.

pub mod assist_pg;
pub mod cartpole;
pub mod envdist;
pub mod policy;

pub use assist_pg::{
    local_pg, run_assist_pg, run_pg_baselines, run_pg_centralized, run_pg_fedavg, run_pg_learner_only,
    score_pg_packet, PgBaselines, PgRoundRecord, PgRun, RLAssistConfig, TestSets,
};
pub use cartpole::{cartpole_step, dynamics, Action, CartPoleParams, EnvState};
pub use envdist::{sample_environments, sample_environments_for, EnvDistribution, EnvParameter};
pub use policy::{estimate_j, pg_gradient, policy_spec, rollout, rollout_batch, Episode, PolicySpec, Step};
