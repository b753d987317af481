//! Synthetic data, learner/provider splits and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub use crate::models::Dataset;
use crate::rng;
use crate::{Error, Result};

/// One isotropic Gaussian class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub classes: Vec<GaussianClass>,
    pub seed: u64,
}

impl GaussianMixtureSpec {
    /// `num_classes` classes in `dim` dimensions with class `k` centered at
    /// `scale · e_k` (requires `dim ≥ num_classes`).
    pub fn one_hot(
        num_classes: usize,
        dim: usize,
        scale: f64,
        sigma: f64,
        per_class: usize,
        seed: u64,
    ) -> Self {
        let classes = (0..num_classes)
            .map(|k| {
                let mut mean = vec![0.0; dim];
                if k < dim {
                    mean[k] = scale;
                }
                GaussianClass {
                    mean,
                    sigma,
                    count: per_class,
                }
            })
            .collect();
        GaussianMixtureSpec { classes, seed }
    }

    pub fn dim(&self) -> usize {
        self.classes.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for c in &self.classes {
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.mean.len(),
                });
            }
            if !(c.sigma > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "sigma must be positive, got {}",
                    c.sigma
                )));
            }
        }
        Ok(())
    }
}

/// Draws every class's records in class order.
pub fn generate_gaussian(spec: &GaussianMixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let dim = spec.dim();
    let mut rng = rng::rng(spec.seed);
    let total: usize = spec.classes.iter().map(|c| c.count).sum();
    let mut features = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for (label, class) in spec.classes.iter().enumerate() {
        for _ in 0..class.count {
            for m in &class.mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(m + class.sigma * z);
            }
            labels.push(label);
        }
    }
    Dataset::new(dim, features, labels)
}

/// Round half up.
pub fn round_count(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn indices_by_class(data: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.num_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    by_class
}

/// Sends `round(fraction · count)` records of each class (chosen uniformly
/// without replacement) to the learner and the rest to the provider. Classes
/// absent from the map go entirely to the provider. Both outputs keep the
/// input order.
pub fn split_by_class_fraction(
    data: &Dataset,
    learner_fraction: &BTreeMap<usize, f64>,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    for (&class, &f) in learner_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "fraction for class {class} must lie in [0, 1], got {f}"
            )));
        }
    }
    let mut rng = rng::rng(seed);
    let mut to_learner = vec![false; data.len()];
    for (class, mut idx) in indices_by_class(data).into_iter().enumerate() {
        let f = learner_fraction.get(&class).copied().unwrap_or(0.0);
        let take = round_count(f * idx.len() as f64).min(idx.len());
        idx.shuffle(&mut rng);
        for &i in &idx[..take] {
            to_learner[i] = true;
        }
    }
    Ok(split_mask(data, &to_learner))
}

fn split_mask(data: &Dataset, to_learner: &[bool]) -> (Dataset, Dataset) {
    let (l, p): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| to_learner[i]);
    (data.select(&l), data.select(&p))
}

/// Learner/provider partition recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    /// |D_learner| / |D_provider|.
    pub rho: f64,
    /// Fraction of the learner's records taken from the primary class.
    pub gamma_l: f64,
    /// Primary class; `None` picks one uniformly using `seed`.
    pub primary_class: Option<usize>,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.gamma_l > 0.0 && self.gamma_l <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_l must lie in (0, 1], got {}",
                self.gamma_l
            )));
        }
        Ok(())
    }

    /// Learner size for a pool of `n` records.
    pub fn learner_size(&self, n: usize) -> usize {
        round_count(n as f64 * self.rho / (1.0 + self.rho)).min(n)
    }
}

/// Spreads `total` over classes with `available` records each: every class
/// gets `round(total / classes)`, and the rounding surplus or deficit is
/// absorbed one record at a time by the class with the most spare records
/// (when adding) or the largest allocation (when removing).
fn spread_counts(total: usize, available: &[usize]) -> Vec<usize> {
    if available.is_empty() {
        return Vec::new();
    }
    let share = round_count(total as f64 / available.len() as f64);
    let mut counts = vec![share; available.len()];
    let mut assigned = share * available.len();
    while assigned < total {
        let k = (0..counts.len())
            .max_by(|&a, &b| {
                let sa = available[a] as i64 - counts[a] as i64;
                let sb = available[b] as i64 - counts[b] as i64;
                sa.cmp(&sb).then(b.cmp(&a))
            })
            .unwrap();
        counts[k] += 1;
        assigned += 1;
    }
    while assigned > total {
        let k = (0..counts.len())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .unwrap();
        counts[k] -= 1;
        assigned -= 1;
    }
    counts
}

/// Splits `data` between learner and provider by size ratio and learner
/// imbalance. The learner receives `round(γ·|D_L|)` primary-class records and
/// an even spread of the remainder over the other classes; the provider
/// receives every record the learner did not take.
pub fn partition(data: &Dataset, spec: &PartitionSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let by_class = indices_by_class(data);
    let k = by_class.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "partition needs at least two classes".into(),
        ));
    }
    let mut rng = rng::rng(spec.seed);
    let primary = match spec.primary_class {
        Some(c) if c < k => c,
        Some(c) => {
            return Err(Error::InvalidLabel {
                label: c,
                num_classes: k,
            })
        }
        None => rng.random_range(0..k),
    };
    let n_learner = spec.learner_size(data.len());
    let n_primary = round_count(spec.gamma_l * n_learner as f64).min(n_learner);
    let others: Vec<usize> = (0..k).filter(|&c| c != primary).collect();
    let other_available: Vec<usize> = others.iter().map(|&c| by_class[c].len()).collect();
    let other_counts = spread_counts(n_learner - n_primary, &other_available);

    let mut wanted = vec![0; k];
    wanted[primary] = n_primary;
    for (&c, &n) in others.iter().zip(&other_counts) {
        wanted[c] = n;
    }

    let mut to_learner = vec![false; data.len()];
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if wanted[class] > idx.len() {
            return Err(Error::InsufficientRecords {
                class,
                requested: wanted[class],
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..wanted[class]] {
            to_learner[i] = true;
        }
    }
    let (learner, provider) = split_mask(data, &to_learner);
    // Provider order is randomized so no class block structure leaks into
    // sequential consumers.
    let mut order: Vec<usize> = (0..provider.len()).collect();
    order.shuffle(&mut rng);
    Ok((learner, provider.select(&order)))
}

/// Reads a headered CSV file with a mandatory `label` column. All other
/// columns are features, in file order.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| Error::MissingColumn("label".into()))?;
    let dim = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let cell_err = |message: String| Error::CsvCell {
                row,
                column: headers[j].to_string(),
                message,
            };
            let cell = cell.trim();
            if j == label_col {
                let y: usize = cell
                    .parse()
                    .map_err(|e| cell_err(format!("invalid label {cell:?}: {e}")))?;
                labels.push(y);
            } else {
                let x: f64 = cell
                    .parse()
                    .map_err(|e| cell_err(format!("invalid number {cell:?}: {e}")))?;
                if !x.is_finite() {
                    return Err(cell_err(format!("non-finite value {cell:?}")));
                }
                features.push(x);
            }
        }
    }
    Dataset::new(dim, features, labels)
}
