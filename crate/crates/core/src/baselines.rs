//! Comparison algorithms: centralized SGD, learner-only SGD and two-agent
//! FedAvg. They consume the same configuration, data and seeds as
//! [`run_assist_sgd`](crate::protocol::run_assist_sgd), and one of their
//! "rounds" is `total_local_iters` SGD iterations, so histories line up round
//! for round.

use std::time::Instant;

use crate::models::{self, Aggregation, Dataset, ModelSpec, ParamVector};
use crate::protocol::{
    local_train, report_loss, test_accuracy, AssistConfig, HistoryPoint, LocalSgd, Participant,
    Party,
};
use crate::rng::{self, tag};
use crate::Result;

#[derive(Debug, Clone)]
pub struct History {
    /// Round 0 (initial model) through round R.
    pub points: Vec<HistoryPoint>,
    pub final_params: ParamVector,
}

fn initial(spec: &ModelSpec, config: &AssistConfig) -> ParamVector {
    models::init_params(spec, rng::derive(config.seed, &[tag::INIT]))
}

fn opts(config: &AssistConfig, iters: usize, round: usize) -> LocalSgd<'_> {
    LocalSgd {
        iters,
        eta: config.eta.at(round),
        batch_size: config.batch_size,
        // only the endpoint is needed
        sample_period: usize::MAX,
        privacy: config.privacy.as_ref(),
    }
}

/// Mean training loss to report for a model.
type Reporter<'a> = &'a (dyn Fn(&[f64]) -> Result<f64> + Sync);

/// Plain SGD for `rounds · total_local_iters` iterations, reporting every
/// `total_local_iters`. The reported training loss is the mean loss on the
/// training data unless `reporter` is given.
fn run_plain(
    config: &AssistConfig,
    spec: &ModelSpec,
    data: &Dataset,
    reporter: Option<Reporter<'_>>,
    test: Option<&Dataset>,
    stream: u64,
    party: Party,
) -> Result<History> {
    config.validate()?;
    let mut theta = initial(spec, config);
    let own = |theta: &[f64]| -> Result<f64> {
        let sum = models::loss(spec, theta, data, Aggregation::Sum)?;
        Ok(report_loss(sum, data.len()))
    };
    let report = |theta: &[f64]| match reporter {
        Some(f) => f(theta),
        None => own(theta),
    };
    let mut points = vec![HistoryPoint {
        round: 0,
        train_loss: report(&theta)?,
        test_metric: test_accuracy(spec, &theta, test)?,
        test_metric_2: None,
        wall_ms: 0.0,
    }];
    for r in 1..=config.rounds {
        let started = Instant::now();
        let mut rng = rng::rng_for(config.seed, &[tag::TRAIN, stream, r as u64]);
        let packet = local_train(
            spec,
            &theta,
            data,
            &opts(config, config.total_local_iters, r),
            party,
            r,
            &mut rng,
        )?;
        theta = packet.last().params.clone();
        let train_loss = match reporter {
            Some(f) => f(&theta)?,
            None => report_loss(packet.last().local_loss, data.len()),
        };
        points.push(HistoryPoint {
            round: r,
            train_loss,
            test_metric: test_accuracy(spec, &theta, test)?,
            test_metric_2: None,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(History {
        points,
        final_params: theta,
    })
}

/// SGD on the union of both parties' data.
pub fn run_centralized(
    config: &AssistConfig,
    spec: &ModelSpec,
    union: &Dataset,
    test: Option<&Dataset>,
) -> Result<History> {
    run_plain(config, spec, union, None, test, tag::CENTRAL, Party::Learner)
}

/// Centralized SGD over two participants' merged objective.
pub fn run_centralized_pair(
    config: &AssistConfig,
    learner: &Participant,
    provider: &Participant,
    test: Option<&Dataset>,
) -> Result<History> {
    let spec = learner.spec().merge(provider.spec())?;
    let union = if spec.is_classifier() {
        learner.data().concat(provider.data())?
    } else {
        Dataset::empty(spec.input_dim())
    };
    run_centralized(config, &spec, &union, test)
}

/// SGD on the learner's data alone. The reported training loss is the mean
/// loss on the learner's own data.
pub fn run_learner_only(
    config: &AssistConfig,
    spec: &ModelSpec,
    learner_data: &Dataset,
    test: Option<&Dataset>,
) -> Result<History> {
    run_plain(config, spec, learner_data, None, test, tag::LEARNER, Party::Learner)
}

/// Learner-only SGD whose reported training loss is the global mean loss
/// over both parties, for comparison with the two-party algorithms.
pub fn run_learner_only_pair(
    config: &AssistConfig,
    learner: &Participant,
    provider: &Participant,
    test: Option<&Dataset>,
) -> Result<History> {
    let records = learner.num_records() + provider.num_records();
    let global = |theta: &[f64]| -> Result<f64> {
        Ok(report_loss(
            learner.local_loss(theta)? + provider.local_loss(theta)?,
            records,
        ))
    };
    run_plain(
        config,
        learner.spec(),
        learner.data(),
        Some(&global),
        test,
        tag::LEARNER,
        Party::Learner,
    )
}

/// FedAvg with the learner and the provider as the two agents. Each round
/// both agents run their share of the local iteration budget from the current
/// global model; the new global model is the dataset-size-weighted average
/// (equal weights when both datasets are empty). The reported training loss
/// is the post-aggregation global loss.
pub fn run_fedavg(
    config: &AssistConfig,
    learner: &Participant,
    provider: &Participant,
    test: Option<&Dataset>,
) -> Result<History> {
    config.validate()?;
    let (n_l, n_p) = (learner.num_records(), provider.num_records());
    let (t_l, t_p) = config.iterations(n_l, n_p);
    let (w_l, w_p) = fedavg_weights(n_l, n_p);
    let records = n_l + n_p;
    let global_loss = |theta: &[f64]| -> Result<f64> {
        Ok(report_loss(
            learner.local_loss(theta)? + provider.local_loss(theta)?,
            records,
        ))
    };
    let mut theta = initial(learner.spec(), config);
    let mut points = vec![HistoryPoint {
        round: 0,
        train_loss: global_loss(&theta)?,
        test_metric: test_accuracy(learner.spec(), &theta, test)?,
        test_metric_2: None,
        wall_ms: 0.0,
    }];
    for r in 1..=config.rounds {
        let started = Instant::now();
        let local = |agent: &Participant, iters: usize| -> Result<ParamVector> {
            let mut rng = rng::rng_for(config.seed, &[tag::TRAIN, agent.party().tag(), r as u64]);
            let packet = agent.train(&theta, &opts(config, iters, r), r, &mut rng)?;
            Ok(packet.last().params.clone())
        };
        let a = local(learner, t_l)?;
        let b = local(provider, t_p)?;
        theta = average(&[(w_l, &a), (w_p, &b)]);
        points.push(HistoryPoint {
            round: r,
            train_loss: global_loss(&theta)?,
            test_metric: test_accuracy(learner.spec(), &theta, test)?,
            test_metric_2: None,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(History {
        points,
        final_params: theta,
    })
}

/// Size-proportional averaging weights for two agents.
pub fn fedavg_weights(n_a: usize, n_b: usize) -> (f64, f64) {
    let total = n_a + n_b;
    if total == 0 {
        (0.5, 0.5)
    } else {
        (n_a as f64 / total as f64, n_b as f64 / total as f64)
    }
}

/// Weighted sum of parameter vectors, accumulated in the given order.
pub fn average(parts: &[(f64, &ParamVector)]) -> ParamVector {
    let len = parts.first().map_or(0, |(_, p)| p.len());
    let mut out = ParamVector::zeros(len);
    for (w, p) in parts {
        out.axpy(*w, p);
    }
    out
}
