//! Run configuration.
//!
//! The file format is TOML restricted to flat `key = value` lines with dotted
//! section keys:
//!
//! ```text
//! experiment = "dl"
//! seeds = [0, 1, 2]
//! algorithms = "all"
//! data.source = "one_hot"
//! data.num_classes = 10
//! train.rounds = 10
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{GaussianClass, GaussianMixtureSpec};
use crate::models::ModelSpec;
use crate::privacy::PrivacySpec;
use crate::protocol::{AssistConfig, BatchSize, IterSplit, LearningRate};
use crate::rl::{policy_spec, EnvDistribution, EnvParameter, PolicySpec};
use crate::{Error, Result};

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Dl,
    Rl,
    Theory,
    Dp,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dl => "dl",
            ExperimentKind::Rl => "rl",
            ExperimentKind::Theory => "theory",
            ExperimentKind::Dp => "dp",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Assist,
    Centralized,
    LearnerOnly,
    Fedavg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Assist,
        Algorithm::Centralized,
        Algorithm::LearnerOnly,
        Algorithm::Fedavg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Assist => "assist",
            Algorithm::Centralized => "centralized",
            Algorithm::LearnerOnly => "learner_only",
            Algorithm::Fedavg => "fedavg",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| config_err("algorithms", format!("unknown algorithm `{s}`")))
    }
}

/// `all` or a comma-separated list of algorithm names, in first-seen order
/// without duplicates.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let list = list.trim();
    if list == "all" {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim) {
        if name.is_empty() {
            return Err(config_err("algorithms", "empty algorithm name"));
        }
        let a: Algorithm = name.parse()?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Comma-separated non-negative integers.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let seeds = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| config_err("seeds", format!("`{}` is not a non-negative integer", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(config_err("seeds", "seed list is empty"));
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// One isotropic Gaussian per entry of `data.means`.
    #[default]
    Gaussian,
    /// Class `k` centered at `mean_scale · e_k` in `dim` dimensions.
    OneHot,
    /// Training and test records from CSV files.
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Per-class learner fractions from `data.learner_fractions`.
    #[default]
    ClassFraction,
    /// Size ratio `rho` and imbalance `gamma_l`.
    Partition,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub means: Vec<Vec<f64>>,
    pub num_classes: usize,
    pub dim: usize,
    pub mean_scale: f64,
    pub sigma: f64,
    pub per_class: usize,
    pub test_per_class: usize,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub split: SplitKind,
    pub learner_fractions: Vec<f64>,
    pub rho: f64,
    pub gamma_l: f64,
    pub primary_class: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Gaussian,
            means: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            num_classes: 10,
            dim: 20,
            mean_scale: 1.0,
            sigma: 1.5,
            per_class: 50,
            test_per_class: 1000,
            train_csv: None,
            test_csv: None,
            split: SplitKind::ClassFraction,
            learner_fractions: vec![0.9, 0.1],
            rho: 1.0 / 9.0,
            gamma_l: 1.0,
            primary_class: None,
        }
    }
}

impl DataConfig {
    fn classes(&self, count: usize) -> Vec<GaussianClass> {
        match self.source {
            DataSource::OneHot => {
                GaussianMixtureSpec::one_hot(self.num_classes, self.dim, self.mean_scale, self.sigma, count, 0)
                    .classes
            }
            _ => self
                .means
                .iter()
                .map(|m| GaussianClass {
                    mean: m.clone(),
                    sigma: self.sigma,
                    count,
                })
                .collect(),
        }
    }

    pub fn train_mixture(&self, seed: u64) -> GaussianMixtureSpec {
        GaussianMixtureSpec {
            classes: self.classes(self.per_class),
            seed,
        }
    }

    pub fn test_mixture(&self, seed: u64) -> GaussianMixtureSpec {
        GaussianMixtureSpec {
            classes: self.classes(self.test_per_class),
            seed,
        }
    }

    /// Number of classes and input dimension of the generated data.
    /// CSV sources report `None`; their shape is known after loading.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self.source {
            DataSource::OneHot => Some((self.num_classes, self.dim)),
            DataSource::Gaussian => Some((self.means.len(), self.means.first().map_or(0, Vec::len))),
            DataSource::Csv => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(config_err("data.sigma", "must be positive"));
        }
        match self.source {
            DataSource::Gaussian => {
                if self.means.len() < 2 {
                    return Err(config_err("data.means", "needs at least two class means"));
                }
                let d = self.means[0].len();
                if d == 0 || self.means.iter().any(|m| m.len() != d) {
                    return Err(config_err("data.means", "means must share one positive dimension"));
                }
            }
            DataSource::OneHot => {
                if self.num_classes < 2 {
                    return Err(config_err("data.num_classes", "needs at least two classes"));
                }
                if self.dim < self.num_classes {
                    return Err(config_err("data.dim", "one-hot means need dim >= num_classes"));
                }
            }
            DataSource::Csv => {
                for (field, path) in [("data.train_csv", &self.train_csv), ("data.test_csv", &self.test_csv)] {
                    match path {
                        None if field == "data.train_csv" => {
                            return Err(config_err(field, "required when data.source = \"csv\""))
                        }
                        Some(p) if !p.exists() => {
                            return Err(config_err(field, format!("file {} does not exist", p.display())))
                        }
                        _ => {}
                    }
                }
            }
        }
        match self.split {
            SplitKind::ClassFraction => {
                if let Some(f) = self.learner_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
                    return Err(config_err("data.learner_fractions", format!("{f} is outside [0, 1]")));
                }
            }
            SplitKind::Partition => {
                if !(self.rho > 0.0 && self.rho.is_finite()) {
                    return Err(config_err("data.rho", "must be positive"));
                }
                if !(self.gamma_l > 0.0 && self.gamma_l <= 1.0) {
                    return Err(config_err("data.gamma_l", "must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn spec(&self, input_dim: usize, num_classes: usize) -> Result<ModelSpec> {
        let spec = match self.kind {
            ModelKind::Logistic => ModelSpec::logistic(input_dim, num_classes),
            ModelKind::Mlp => ModelSpec::mlp(input_dim, self.hidden.clone(), num_classes),
        };
        spec.validate().map_err(|e| config_err("model", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub rounds: usize,
    pub total_local_iters: usize,
    pub learner_iters: Option<usize>,
    pub provider_iters: Option<usize>,
    pub eta: f64,
    pub eta_decay: f64,
    pub sample_period: usize,
    pub batch_size: usize,
    pub full_batch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let d = AssistConfig::default();
        TrainConfig {
            rounds: d.rounds,
            total_local_iters: d.total_local_iters,
            learner_iters: None,
            provider_iters: None,
            eta: d.eta.base,
            eta_decay: d.eta.decay,
            sample_period: d.sample_period,
            batch_size: match d.batch_size {
                BatchSize::MiniBatch(b) => b,
                BatchSize::Full => 256,
            },
            full_batch: false,
        }
    }
}

impl TrainConfig {
    pub fn assist_config(&self, seed: u64, privacy: Option<PrivacySpec>) -> Result<AssistConfig> {
        let split = match (self.learner_iters, self.provider_iters) {
            (None, None) => IterSplit::Proportional,
            (Some(learner), Some(provider)) => IterSplit::Explicit { learner, provider },
            _ => {
                return Err(config_err(
                    "train.learner_iters",
                    "set both train.learner_iters and train.provider_iters, or neither",
                ))
            }
        };
        let config = AssistConfig {
            rounds: self.rounds,
            total_local_iters: self.total_local_iters,
            split,
            eta: LearningRate::geometric(self.eta, self.eta_decay),
            sample_period: self.sample_period,
            batch_size: if self.full_batch {
                BatchSize::Full
            } else {
                BatchSize::MiniBatch(self.batch_size)
            },
            seed,
            privacy,
        };
        config.validate().map_err(|e| match e {
            Error::Config { field, message } => config_err(&format!("train.{field}"), message),
            other => other,
        })?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacyConfig {
    /// Per-step ε values. A `dl` run accepts at most one; a `dp` run sweeps them.
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub clip_norm: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig {
            epsilons: Vec::new(),
            delta: 1e-5,
            clip_norm: 1.0,
        }
    }
}

impl PrivacyConfig {
    pub fn spec(&self, epsilon: f64) -> Result<PrivacySpec> {
        let spec = PrivacySpec {
            epsilon,
            delta: self.delta,
            clip_norm: self.clip_norm,
        };
        spec.validate().map_err(|e| config_err("privacy", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    #[default]
    Uniform,
    Mixture,
    AffineBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistConfig {
    pub kind: DistKind,
    pub low: f64,
    pub high: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
    pub offset: f64,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig {
            kind: DistKind::Uniform,
            low: 0.0,
            high: 1.0,
            p: 0.0,
            alpha: 1.0,
            beta: 1.0,
            scale: 1.0,
            offset: 0.0,
        }
    }
}

impl DistConfig {
    fn uniform(low: f64, high: f64) -> Self {
        DistConfig {
            low,
            high,
            ..Default::default()
        }
    }

    pub fn distribution(&self) -> EnvDistribution {
        match self.kind {
            DistKind::Uniform => EnvDistribution::Uniform {
                low: self.low,
                high: self.high,
            },
            DistKind::Mixture => EnvDistribution::Mixture {
                p: self.p,
                alpha: self.alpha,
                beta: self.beta,
                low: self.low,
                high: self.high,
            },
            DistKind::AffineBeta => EnvDistribution::AffineBeta {
                scale: self.scale,
                alpha: self.alpha,
                beta: self.beta,
                offset: self.offset,
            },
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        self.distribution()
            .validate()
            .map_err(|e| config_err(field, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvParameterName {
    #[default]
    PoleLength,
    ForceMagnitude,
}

impl From<EnvParameterName> for EnvParameter {
    fn from(p: EnvParameterName) -> Self {
        match p {
            EnvParameterName::PoleLength => EnvParameter::PoleLength,
            EnvParameterName::ForceMagnitude => EnvParameter::ForceMagnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    pub rounds: usize,
    pub local_iters: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub sample_period: usize,
    pub gamma: f64,
    pub eval_episodes: usize,
    pub hidden: Vec<usize>,
    pub parameter: EnvParameterName,
    pub learner_envs: usize,
    pub provider_envs: usize,
    pub learner: DistConfig,
    pub provider: DistConfig,
    pub test_envs: usize,
    pub test_episodes: usize,
    pub test_i: DistConfig,
    pub test_ii: DistConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            rounds: 10,
            local_iters: 20,
            eta: 5e-3,
            batch_size: 32,
            sample_period: 4,
            gamma: 0.99,
            eval_episodes: 32,
            hidden: vec![4],
            parameter: EnvParameterName::PoleLength,
            learner_envs: 5,
            provider_envs: 5,
            learner: DistConfig::uniform(4.0, 5.0),
            provider: DistConfig::uniform(0.0, 1.0),
            test_envs: 10,
            test_episodes: 32,
            test_i: DistConfig::uniform(0.0, 5.0),
            test_ii: DistConfig {
                kind: DistKind::Mixture,
                p: 0.2,
                alpha: 1.0,
                beta: 5.0,
                low: 0.0,
                high: 5.0,
                ..Default::default()
            },
        }
    }
}

impl RlConfig {
    pub fn policy(&self) -> PolicySpec {
        policy_spec(self.hidden.clone())
    }

    fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("rl.rounds", self.rounds),
            ("rl.batch_size", self.batch_size),
            ("rl.sample_period", self.sample_period),
            ("rl.eval_episodes", self.eval_episodes),
            ("rl.learner_envs", self.learner_envs),
            ("rl.provider_envs", self.provider_envs),
            ("rl.test_episodes", self.test_episodes),
        ] {
            if v == 0 {
                return Err(config_err(field, "must be at least 1"));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(config_err("rl.eta", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(config_err("rl.gamma", "must lie in (0, 1]"));
        }
        self.policy()
            .validate()
            .map_err(|e| config_err("rl.hidden", e.to_string()))?;
        self.learner.validate("rl.learner")?;
        self.provider.validate("rl.provider")?;
        self.test_i.validate("rl.test_i")?;
        self.test_ii.validate("rl.test_ii")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    /// Round counts to check, each with its own step size.
    pub rounds: Vec<usize>,
    /// Local iterations per party per round.
    pub local_iters: usize,
    pub center_learner: Vec<f64>,
    pub center_provider: Vec<f64>,
    /// Multiplier on the theorem step size.
    pub eta_scale: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            rounds: vec![4, 16, 64],
            local_iters: 10,
            center_learner: vec![-1.0, -1.0],
            center_provider: vec![1.0, -1.25],
            eta_scale: 1.0,
        }
    }
}

impl TheoryConfig {
    fn validate(&self) -> Result<()> {
        if self.rounds.is_empty() || self.rounds.contains(&0) {
            return Err(config_err("theory.rounds", "needs positive round counts"));
        }
        if self.local_iters == 0 {
            return Err(config_err("theory.local_iters", "must be at least 1"));
        }
        if self.center_learner.is_empty() || self.center_learner.len() != self.center_provider.len() {
            return Err(config_err(
                "theory.center_provider",
                "centers must share one positive dimension",
            ));
        }
        if !(self.eta_scale > 0.0) {
            return Err(config_err("theory.eta_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub file: String,
    /// Record wall-clock times. Off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            file: "metrics.csv".into(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub algorithms: String,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub privacy: PrivacyConfig,
    pub rl: RlConfig,
    pub theory: TheoryConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentKind::Dl,
            algorithms: "all".into(),
            seeds: vec![0],
            out: PathBuf::from("results"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            privacy: PrivacyConfig::default(),
            rl: RlConfig::default(),
            theory: TheoryConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        RunConfig {
            experiment: kind,
            algorithms: match kind {
                ExperimentKind::Dp | ExperimentKind::Theory => "assist".into(),
                _ => "all".into(),
            },
            privacy: PrivacyConfig {
                epsilons: match kind {
                    ExperimentKind::Dp => vec![1.0, 5.0, 10.0],
                    _ => Vec::new(),
                },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    /// Parses a config file body on top of the defaults of its experiment
    /// kind. Keys given in the file override single defaults, so setting
    /// `rl.learner.low` keeps the default `rl.learner.high`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_for(None, text)
    }

    /// Like [`parse`](Self::parse) for a run whose kind is already known; a
    /// different `experiment` key in the file is an error.
    pub fn parse_for(kind: Option<ExperimentKind>, text: &str) -> Result<Self> {
        let parse_err = |e: &dyn fmt::Display| config_err("config", e.to_string().trim_end());
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(&e.message()))?;
        let file_kind = match user.get("experiment") {
            Some(v) => Some(
                ExperimentKind::deserialize(v.clone())
                    .map_err(|e| config_err("experiment", e.message().to_string()))?,
            ),
            None => None,
        };
        let kind = match (kind, file_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(config_err(
                    "experiment",
                    format!("config file is for `{b}` but the run is `{a}`"),
                ))
            }
            (a, b) => a.or(b).unwrap_or_default(),
        };
        let mut merged = toml::Table::try_from(RunConfig::for_experiment(kind)).map_err(|e| parse_err(&e))?;
        merge(&mut merged, user);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(&e.message()))
    }

    /// Reads a config file; relative CSV paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_for(None, path)
    }

    pub fn load_for(kind: Option<ExperimentKind>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        let mut config = RunConfig::parse_for(kind, &text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.data.train_csv, &mut config.data.test_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn algorithm_list(&self) -> Result<Vec<Algorithm>> {
        parse_algorithms(&self.algorithms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "seed list is empty"));
        }
        let algorithms = self.algorithm_list()?;
        if algorithms.is_empty() {
            return Err(config_err("algorithms", "no algorithms selected"));
        }
        if self.output.file.is_empty() {
            return Err(config_err("output.file", "must not be empty"));
        }
        match self.experiment {
            ExperimentKind::Dl | ExperimentKind::Dp => {
                self.data.validate()?;
                self.train.assist_config(0, None)?;
                if self.experiment == ExperimentKind::Dl && self.privacy.epsilons.len() > 1 {
                    return Err(config_err(
                        "privacy.epsilons",
                        "a dl run takes at most one epsilon; use a dp run to sweep",
                    ));
                }
                if self.experiment == ExperimentKind::Dp && self.privacy.epsilons.is_empty() {
                    return Err(config_err("privacy.epsilons", "a dp run needs at least one epsilon"));
                }
                for &eps in &self.privacy.epsilons {
                    self.privacy.spec(eps)?;
                }
                if let Some((k, d)) = self.data.shape() {
                    self.model.spec(d, k)?;
                }
            }
            ExperimentKind::Rl => self.rl.validate()?,
            ExperimentKind::Theory => {
                self.theory.validate()?;
                if algorithms != [Algorithm::Assist] {
                    return Err(config_err("algorithms", "a theory run only supports `assist`"));
                }
            }
        }
        Ok(())
    }
}

/// Overlays `user` onto `base`, descending into tables present in both.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
