//! Experiment execution: builds every (algorithm, seed) cell from a
//! [`RunConfig`], runs the cells concurrently and writes the metrics CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{Algorithm, DataSource, ExperimentKind, RlConfig, RunConfig, SplitKind};
use super::metrics::{write_metrics_file, MetricsRow};
use super::theory::{verify_run_monotonicity, verify_stationarity, MonotonicityReport, QuadraticPair, StationarityReport};
use crate::baselines::{run_centralized_pair, run_fedavg, run_learner_only_pair};
use crate::data::{self, generate_gaussian, load_csv, split_by_class_fraction, PartitionSpec};
use crate::exec;
use crate::models::Dataset;
use crate::privacy::{compose, CompositionResult, PrivacySpec};
use crate::protocol::{run_assist_sgd, AssistConfig, HistoryPoint, Participant, Party};
use crate::rl::{
    run_assist_pg, run_pg_centralized, run_pg_fedavg, run_pg_learner_only, sample_environments_for, RLAssistConfig,
    TestSets,
};
use crate::rng::{self, tag};
use crate::{Error, Result};

/// Both parties' data and the shared test set for one seed.
#[derive(Debug, Clone)]
pub struct DlData {
    pub learner: Participant,
    pub provider: Participant,
    pub test: Option<Dataset>,
}

/// Generates (or loads) and splits the data of a supervised run.
pub fn prepare_dl_data(config: &RunConfig, seed: u64) -> Result<DlData> {
    let d = &config.data;
    let (train, test) = match d.source {
        DataSource::Csv => {
            let path = d.train_csv.as_ref().ok_or_else(|| Error::Config {
                field: "data.train_csv".into(),
                message: "required when data.source = \"csv\"".into(),
            })?;
            (load_csv(path)?, d.test_csv.as_ref().map(load_csv).transpose()?)
        }
        _ => (
            generate_gaussian(&d.train_mixture(rng::derive(seed, &[tag::DATA])))?,
            Some(generate_gaussian(&d.test_mixture(rng::derive(seed, &[tag::TEST_DATA])))?),
        ),
    };
    let num_classes = match d.shape() {
        Some((k, _)) => k,
        None => train.num_classes().max(test.as_ref().map_or(0, Dataset::num_classes)),
    };
    let split_seed = rng::derive(seed, &[tag::PARTITION]);
    let (learner_data, provider_data) = match d.split {
        SplitKind::ClassFraction => {
            if d.learner_fractions.len() < num_classes {
                return Err(Error::Config {
                    field: "data.learner_fractions".into(),
                    message: format!("needs one fraction per class ({num_classes})"),
                });
            }
            let fractions: BTreeMap<usize, f64> = d.learner_fractions.iter().copied().enumerate().collect();
            split_by_class_fraction(&train, &fractions, split_seed)?
        }
        SplitKind::Partition => data::partition(
            &train,
            &PartitionSpec {
                rho: d.rho,
                gamma_l: d.gamma_l,
                primary_class: d.primary_class,
                seed: split_seed,
            },
        )?,
    };
    let spec = config.model.spec(train.dim(), num_classes)?;
    Ok(DlData {
        learner: Participant::new(Party::Learner, spec.clone(), learner_data)?,
        provider: Participant::new(Party::Provider, spec, provider_data)?,
        test,
    })
}

/// Outcome of one supervised cell.
#[derive(Debug, Clone)]
pub struct DlCell {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub history: Vec<HistoryPoint>,
    /// Set for AssistSGD cells.
    pub monotonicity: Option<MonotonicityReport>,
}

pub fn run_dl_cell(
    config: &RunConfig,
    algorithm: Algorithm,
    seed: u64,
    data: &DlData,
    privacy: Option<PrivacySpec>,
) -> Result<DlCell> {
    let assist = config.train.assist_config(seed, privacy)?;
    let test = data.test.as_ref();
    let (history, monotonicity) = match algorithm {
        Algorithm::Assist => {
            let run = run_assist_sgd(&assist, &data.learner, &data.provider, test)?;
            let report = verify_run_monotonicity(&run);
            (run.history, Some(report))
        }
        Algorithm::Centralized => (run_centralized_pair(&assist, &data.learner, &data.provider, test)?.points, None),
        Algorithm::LearnerOnly => (run_learner_only_pair(&assist, &data.learner, &data.provider, test)?.points, None),
        Algorithm::Fedavg => (run_fedavg(&assist, &data.learner, &data.provider, test)?.points, None),
    };
    Ok(DlCell {
        algorithm,
        seed,
        history,
        monotonicity,
    })
}

/// Training and test environments of one RL seed.
pub fn rl_setup(rl: &RlConfig, seed: u64) -> Result<(RLAssistConfig, TestSets)> {
    let param = rl.parameter.into();
    let envs = |dist: &super::config::DistConfig, n: usize, t: u64| {
        sample_environments_for(&dist.distribution(), param, n, rng::derive(seed, &[tag::ENVS, t]))
    };
    let config = RLAssistConfig {
        rounds: rl.rounds,
        local_iters: rl.local_iters,
        eta: rl.eta,
        batch_size: rl.batch_size,
        sample_period: rl.sample_period,
        gamma: rl.gamma,
        eval_episodes: rl.eval_episodes,
        learner_envs: envs(&rl.learner, rl.learner_envs, tag::LEARNER)?,
        provider_envs: envs(&rl.provider, rl.provider_envs, tag::PROVIDER)?,
        seed,
    };
    let tests = TestSets {
        test_i: envs(&rl.test_i, rl.test_envs, tag::TEST_I)?,
        test_ii: envs(&rl.test_ii, rl.test_envs, tag::TEST_II)?,
        episodes: rl.test_episodes,
    };
    Ok((config, tests))
}

pub fn run_rl_cell(rl: &RlConfig, algorithm: Algorithm, seed: u64) -> Result<Vec<HistoryPoint>> {
    let (config, tests) = rl_setup(rl, seed)?;
    let spec = rl.policy();
    let t = Some(&tests);
    Ok(match algorithm {
        Algorithm::Assist => run_assist_pg(&config, &spec, t)?.history,
        Algorithm::Centralized => run_pg_centralized(&config, &spec, t)?.points,
        Algorithm::LearnerOnly => run_pg_learner_only(&config, &spec, t)?.points,
        Algorithm::Fedavg => run_pg_fedavg(&config, &spec, t)?.points,
    })
}

/// Privacy spent by one party over a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountingRow {
    pub epsilon: f64,
    pub delta: f64,
    pub party: Party,
    pub steps: u64,
    pub batch_fraction: f64,
    pub composed: CompositionResult,
}

/// Strong-composition totals for both parties of an AssistSGD run.
pub fn dp_accounting(assist: &AssistConfig, spec: &PrivacySpec, learner_len: usize, provider_len: usize) -> Result<Vec<AccountingRow>> {
    let (t_l, t_p) = assist.iterations(learner_len, provider_len);
    [(Party::Learner, t_l, learner_len), (Party::Provider, t_p, provider_len)]
        .into_iter()
        .map(|(party, iters, n)| {
            let steps = (iters * assist.rounds) as u64;
            let q = match assist.batch_size {
                crate::protocol::BatchSize::Full => 1.0,
                crate::protocol::BatchSize::MiniBatch(b) if n > 0 => (b.min(n)) as f64 / n as f64,
                crate::protocol::BatchSize::MiniBatch(_) => 1.0,
            };
            Ok(AccountingRow {
                epsilon: spec.epsilon,
                delta: spec.delta,
                party,
                steps,
                batch_fraction: q,
                composed: compose(spec, steps, q)?,
            })
        })
        .collect()
}

/// Everything an experiment produced, before it is written out.
#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsRow>,
    /// Monotonicity of each AssistSGD cell, keyed by (label, seed).
    pub monotonicity: Vec<(String, u64, MonotonicityReport)>,
    pub stationarity: Vec<StationarityReport>,
    pub accounting: Vec<AccountingRow>,
}

impl ExperimentResult {
    /// Human-readable description of every failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (label, seed, rep) in &self.monotonicity {
            if !rep.passed() {
                out.push(format!("monotonicity {label} seed {seed}: {rep}"));
            }
        }
        for rep in &self.stationarity {
            if !rep.passed() {
                out.push(format!("stationarity {rep}"));
            }
        }
        let mut by_r: Vec<&StationarityReport> = self.stationarity.iter().collect();
        by_r.sort_by_key(|r| r.rounds);
        for w in by_r.windows(2) {
            if w[0].rounds < w[1].rounds && w[1].min_grad_sq >= w[0].min_grad_sq && w[0].min_grad_sq > 0.0 {
                out.push(format!(
                    "realized minimum did not decrease from R={} ({:e}) to R={} ({:e})",
                    w[0].rounds, w[0].min_grad_sq, w[1].rounds, w[1].min_grad_sq
                ));
            }
        }
        out
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for (label, seed, rep) in &self.monotonicity {
            let _ = writeln!(s, "monotonicity {label} seed {seed}: {rep}");
        }
        for rep in &self.stationarity {
            let _ = writeln!(s, "stationarity {rep}");
        }
        for f in self.failures() {
            let _ = writeln!(s, "FAILED {f}");
        }
        s
    }
}

fn history_rows(label: &str, seed: u64, history: &[HistoryPoint], timing: bool) -> Vec<MetricsRow> {
    history.iter().map(|p| MetricsRow::from_history(label, seed, p, timing)).collect()
}

fn run_supervised(config: &RunConfig, algorithms: &[Algorithm], result: &mut ExperimentResult) -> Result<()> {
    let seeds = &config.seeds;
    let datasets = exec::map_slice(seeds, |&s| prepare_dl_data(config, s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let epsilons: Vec<Option<f64>> = if config.privacy.epsilons.is_empty() {
        vec![None]
    } else {
        config.privacy.epsilons.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for &eps in &epsilons {
        for &alg in algorithms {
            for i in 0..seeds.len() {
                cells.push((eps, alg, i));
            }
        }
    }
    let timing = config.output.timing;
    let outcomes = exec::map_slice(&cells, |&(eps, alg, i)| {
        let privacy = eps.map(|e| config.privacy.spec(e)).transpose()?;
        run_dl_cell(config, alg, seeds[i], &datasets[i], privacy)
    });
    for (&(eps, _, _), outcome) in cells.iter().zip(outcomes) {
        let cell = outcome?;
        let label = match (config.experiment, eps) {
            (ExperimentKind::Dp, Some(e)) => format!("{}_eps{e}", cell.algorithm),
            _ => cell.algorithm.to_string(),
        };
        result.rows.extend(history_rows(&label, cell.seed, &cell.history, timing));
        if let Some(rep) = cell.monotonicity {
            result.monotonicity.push((label, cell.seed, rep));
        }
    }
    if config.experiment == ExperimentKind::Dp {
        let d = &datasets[0];
        let assist = config.train.assist_config(seeds[0], None)?;
        for &eps in &config.privacy.epsilons {
            let spec = config.privacy.spec(eps)?;
            result.accounting.extend(dp_accounting(
                &assist,
                &spec,
                d.learner.num_records(),
                d.provider.num_records(),
            )?);
        }
    }
    Ok(())
}

fn run_rl(config: &RunConfig, algorithms: &[Algorithm], result: &mut ExperimentResult) -> Result<()> {
    let cells: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let outcomes = exec::map_slice(&cells, |&(a, s)| run_rl_cell(&config.rl, a, s));
    for (&(a, s), h) in cells.iter().zip(outcomes) {
        result.rows.extend(history_rows(a.name(), s, &h?, config.output.timing));
    }
    Ok(())
}

fn run_theory(config: &RunConfig, result: &mut ExperimentResult) -> Result<()> {
    let t = &config.theory;
    let pair = QuadraticPair {
        learner: t.center_learner.clone(),
        provider: t.center_provider.clone(),
    };
    let reports = exec::map_slice(&t.rounds, |&r| verify_stationarity(&pair, r, t.local_iters, t.eta_scale))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let seed = config.seeds[0];
    for rep in reports {
        let label = format!("assist_r{}", rep.rounds);
        for (r, loss) in rep.run.global_losses().into_iter().enumerate() {
            result.rows.push(MetricsRow {
                algorithm: label.clone(),
                seed,
                round: r,
                global_train_loss: loss,
                test_metric_1: Some(rep.grad_sq[r]),
                test_metric_2: Some(rep.bound),
                wall_ms: config
                    .output
                    .timing
                    .then(|| rep.run.history[r].wall_ms),
            });
        }
        result
            .monotonicity
            .push((label, seed, verify_run_monotonicity(&rep.run)));
        result.stationarity.push(rep);
    }
    Ok(())
}

/// Runs every cell of `config` without writing anything.
pub fn collect(config: &RunConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let algorithms = config.algorithm_list()?;
    let mut result = ExperimentResult::default();
    match config.experiment {
        ExperimentKind::Dl | ExperimentKind::Dp => run_supervised(config, &algorithms, &mut result)?,
        ExperimentKind::Rl => run_rl(config, &algorithms, &mut result)?,
        ExperimentKind::Theory => run_theory(config, &mut result)?,
    }
    Ok(result)
}

fn write_accounting(path: &Path, rows: &[AccountingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epsilon", "delta", "party", "steps", "batch_fraction", "eps_prime", "delta_prime"])?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.delta.to_string(),
            r.party.to_string(),
            r.steps.to_string(),
            r.batch_fraction.to_string(),
            r.composed.eps_prime.to_string(),
            r.composed.delta_prime.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Runs the experiment and writes `<out>/<output.file>` plus, when there is
/// anything to report, `<stem>_report.txt` and (for dp runs)
/// `<stem>_accounting.csv`. Returns the metrics path. Files are written even
/// when a verification check fails; the failure is then returned as
/// [`Error::Verification`].
pub fn run_experiment(config: &RunConfig) -> Result<PathBuf> {
    let result = collect(config)?;
    let out = &config.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(&config.output.file);
    write_metrics_file(&path, &result.rows)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    let report = result.report();
    if !report.is_empty() {
        let p = out.join(format!("{stem}_report.txt"));
        std::fs::write(&p, report).map_err(|e| Error::io(&p, e))?;
    }
    if !result.accounting.is_empty() {
        write_accounting(&out.join(format!("{stem}_accounting.csv")), &result.accounting)?;
    }
    let failures = result.failures();
    if !failures.is_empty() {
        return Err(Error::Verification(failures.join("; ")));
    }
    Ok(path)
}
