//! Monte Carlo benchmarking of the outlier-robust filters on the TDOA
//! tracking scenario: paired runs, parameter sweeps, box-plot summaries and
//! result files.

pub mod config;
pub mod harness;
pub mod output;
pub mod summary;

pub use config::{CliConfigFile, Figure};
pub use harness::{compute_rmse, run_once, run_sweep, RunResult, SweepResult, SweepSpec, SweepVariable};
pub use summary::{summarize, BoxStats, CellSummary};

pub(crate) fn serialize_filter<S: serde::Serializer>(
    filter: &emorf_core::FilterKind,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.serialize_str(filter.name())
}
