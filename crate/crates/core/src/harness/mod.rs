//! Experiment runner: configuration, per-round metrics CSVs, SVG plots and
//! the theory checks.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod theory;

pub use config::{Algorithm, ExperimentKind, RunConfig};
pub use experiment::{collect, run_experiment, ExperimentResult};
pub use metrics::{MetricsRow, MetricsTable, COLUMNS};
pub use plot::emit_plot;
pub use theory::{
    theorem_bound, theorem_eta, verify_monotonicity, verify_stationarity, MonotonicityReport, QuadraticPair,
    StationarityReport,
};
