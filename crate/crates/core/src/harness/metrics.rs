//! Per-round metrics rows and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::protocol::HistoryPoint;
use crate::{Error, Result};

pub const COLUMNS: [&str; 7] = [
    "algorithm",
    "seed",
    "round",
    "global_train_loss",
    "test_metric_1",
    "test_metric_2",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub algorithm: String,
    pub seed: u64,
    pub round: usize,
    pub global_train_loss: f64,
    pub test_metric_1: Option<f64>,
    pub test_metric_2: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl MetricsRow {
    pub fn from_history(algorithm: &str, seed: u64, point: &HistoryPoint, timing: bool) -> Self {
        MetricsRow {
            algorithm: algorithm.to_string(),
            seed,
            round: point.round,
            global_train_loss: point.train_loss,
            test_metric_1: point.test_metric,
            test_metric_2: point.test_metric_2,
            wall_ms: timing.then_some(point.wall_ms),
        }
    }

    fn validate(&self) -> Result<()> {
        let values = [
            Some(self.global_train_loss),
            self.test_metric_1,
            self.test_metric_2,
            self.wall_ms,
        ];
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                party: self.algorithm.clone(),
                iteration: self.round,
            });
        }
        Ok(())
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sorts rows into the canonical (algorithm, seed, round) order.
pub fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.seed.cmp(&b.seed))
            .then(a.round.cmp(&b.round))
    });
}

/// Writes rows in canonical order. Non-finite metrics are rejected as
/// divergence.
pub fn write_metrics<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in &sorted {
        r.validate()?;
        w.write_record([
            r.algorithm.clone(),
            r.seed.to_string(),
            r.round.to_string(),
            r.global_train_loss.to_string(),
            cell(r.test_metric_1),
            cell(r.test_metric_2),
            cell(r.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| Error::io("metrics", e))?;
    Ok(())
}

pub fn write_metrics_file(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics(std::io::BufWriter::new(file), rows)
}

/// A metrics CSV read back as named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl MetricsTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(MetricsTable { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Whether column `name` has any non-empty cell.
    pub fn has_values(&self, name: &str) -> Result<bool> {
        let c = self.column(name)?;
        Ok(self.rows.iter().any(|r| r.get(c).is_some_and(|v| !v.is_empty())))
    }
}
