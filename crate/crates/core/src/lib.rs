//! Two-party assisted learning.
//!
//! A data-limited *learner* improves its model by exchanging sampled training
//! trajectories (parameter vectors plus full-dataset local losses) with a
//! data-rich *provider*. Raw records never leave either party. The crate
//! contains:
//!
//! * [`models`]: quadratic, softmax-regression and tanh-MLP losses with analytic gradients.
//! * [`data`]: synthetic Gaussian data, learner/provider partitioning and CSV ingestion.
//! * [`protocol`]: the trajectory-exchange SGD protocol (AssistSGD).
//! * [`baselines`]: centralized SGD, learner-only SGD and two-agent FedAvg.
//! * [`rl`]: parameterized CartPole, REINFORCE and the policy-gradient variant of the protocol.
//! * [`privacy`]: Gaussian gradient perturbation and strong-composition accounting.
//! * [`harness`]: configuration, experiment runner, convergence checks and plotting.
//!
//! With the default `parallel` feature, record reductions, checkpoint scoring,
//! episode batches and experiment cells run on rayon. Every reduction uses a
//! fixed chunking and summation order, so results are bit-identical with and
//! without the feature.

pub mod baselines;
pub mod data;
mod error;
pub mod exec;
pub mod harness;
pub mod models;
pub mod privacy;
pub mod protocol;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
