//! Monte Carlo runs and parameter sweeps.
//!
//! Every `(sweep value, run)` cell simulates one scenario and feeds the same
//! record to every requested filter, so filter comparisons are paired. The
//! scenario seed depends only on the master seed and the run index, which
//! also pairs runs across sweep values.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use emorf_core::filter::run_filter;
use emorf_core::simulator::simulate;
use emorf_core::{Error, FilterConfig, FilterKind, GroundTruthRecord, ScenarioConfig};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Outcome of one filter on one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    #[serde(serialize_with = "crate::serialize_filter")]
    pub filter: FilterKind,
    /// Value of the swept variable; the scenario's λ for single runs.
    pub value: f64,
    pub run: usize,
    pub seed: u64,
    /// SHA-256 of the simulated record in its text form.
    pub data_hash: String,
    /// Position RMSE; `NaN` for failed runs.
    pub rmse: f64,
    /// Seconds spent filtering the whole trajectory.
    pub wall_time: f64,
    pub em_iterations_total: usize,
    pub nonconverged_steps: usize,
    pub horizon: usize,
    pub error: Option<String>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn wall_time_per_step(&self) -> f64 {
        self.wall_time / self.horizon as f64
    }
}

/// Root mean squared position error, `sqrt(mean_k (Δx² + Δy²))`.
pub fn compute_rmse(truth: &[DVector<f64>], estimates: &[DVector<f64>]) -> Result<f64, Error> {
    if truth.len() != estimates.len() {
        return Err(Error::Dimension {
            context: "trajectory length",
            expected: truth.len(),
            actual: estimates.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Domain("cannot compute RMSE of an empty trajectory".into()));
    }
    let sum: f64 = truth
        .iter()
        .zip(estimates)
        .map(|(x, e)| (e[0] - x[0]).powi(2) + (e[2] - x[2]).powi(2))
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

pub fn data_hash(record: &GroundTruthRecord) -> String {
    hex::encode(Sha256::digest(record.to_text().as_bytes()))
}

/// SplitMix64 finalizer, used to spread run indices over the seed space.
pub fn derive_seed(master: u64, run: usize) -> u64 {
    let mut z = master.wrapping_add((run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn failed(filter: FilterKind, value: f64, run: usize, seed: u64, hash: &str, horizon: usize, err: String) -> RunResult {
    RunResult {
        filter,
        value,
        run,
        seed,
        data_hash: hash.to_string(),
        rmse: f64::NAN,
        wall_time: 0.0,
        em_iterations_total: 0,
        nonconverged_steps: 0,
        horizon,
        error: Some(err),
    }
}

/// Filters an already simulated record. Only the filtering is timed.
pub fn run_on_record(
    scenario: &ScenarioConfig,
    record: &GroundTruthRecord,
    hash: &str,
    filter: FilterKind,
    cfg: &FilterConfig,
    value: f64,
    run: usize,
) -> RunResult {
    let seed = scenario.rng_seed;
    let horizon = record.horizon();
    let initial = match scenario.initial_belief(record) {
        Ok(b) => b,
        Err(e) => return failed(filter, value, run, seed, hash, horizon, e.to_string()),
    };
    let (process, meas) = (scenario.process_model(), scenario.measurement_model());
    let start = Instant::now();
    let estimate = run_filter(
        filter,
        &initial,
        &record.measurements,
        &record.outlier_flags,
        &process,
        &meas,
        cfg,
    );
    let wall_time = start.elapsed().as_secs_f64().max(1e-9);
    let estimate = match estimate {
        Ok(e) => e,
        Err(e) => return failed(filter, value, run, seed, hash, horizon, e.to_string()),
    };
    let means: Vec<DVector<f64>> = estimate.means().cloned().collect();
    let rmse = match compute_rmse(&record.states, &means) {
        Ok(r) if r.is_finite() => r,
        Ok(_) => return failed(filter, value, run, seed, hash, horizon, "non-finite estimate".into()),
        Err(e) => return failed(filter, value, run, seed, hash, horizon, e.to_string()),
    };
    RunResult {
        filter,
        value,
        run,
        seed,
        data_hash: hash.to_string(),
        rmse,
        wall_time,
        em_iterations_total: estimate.em_iterations_total,
        nonconverged_steps: estimate.nonconverged_steps,
        horizon,
        error: None,
    }
}

/// Simulates `scenario` with `seed` and runs one filter on it.
pub fn run_once(scenario: &ScenarioConfig, filter: FilterKind, cfg: &FilterConfig, seed: u64) -> Result<RunResult, Error> {
    let scenario = ScenarioConfig { rng_seed: seed, ..scenario.clone() };
    let record = simulate(&scenario)?;
    let hash = data_hash(&record);
    Ok(run_on_record(&scenario, &record, &hash, filter, cfg, scenario.lambda, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Lambda,
    /// Number of sensors `m`.
    Sensors,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Lambda => "lambda",
            SweepVariable::Sensors => "m",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "lambda" => Ok(SweepVariable::Lambda),
            "m" | "sensors" => Ok(SweepVariable::Sensors),
            other => Err(Error::Domain(format!("unknown sweep variable `{other}` (expected lambda or m)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Base scenario; the swept field is overwritten per value.
    pub scenario: ScenarioConfig,
    pub filter: FilterConfig,
    pub mc_runs: usize,
    pub filters: Vec<FilterKind>,
    pub master_seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    /// One discarded run per (value, filter) before the timed runs.
    pub warmup: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.values.is_empty() {
            return Err(Error::Domain("sweep needs at least one value".into()));
        }
        if self.mc_runs == 0 {
            return Err(Error::Domain("mc_runs must be at least 1".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::Domain("sweep needs at least one filter".into()));
        }
        self.filter.validate()?;
        for &v in &self.values {
            self.scenario_for(v)?.validate()?;
        }
        Ok(())
    }

    pub fn scenario_for(&self, value: f64) -> Result<ScenarioConfig, Error> {
        let mut sc = self.scenario.clone();
        match self.variable {
            SweepVariable::Lambda => sc.lambda = value,
            SweepVariable::Sensors => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::Domain(format!("sensor count must be an integer ≥ 2, got {value}")));
                }
                sc.num_sensors = value as usize;
            }
        }
        Ok(sc)
    }

    pub fn expected_rows(&self) -> usize {
        self.values.len() * self.filters.len() * self.mc_runs
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Sorted by value index, then filter, then run.
    pub rows: Vec<RunResult>,
    pub expected_rows: usize,
}

impl SweepResult {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn succeeded_rows(&self) -> usize {
        self.rows.len() - self.failed_rows()
    }
}

fn run_cell(spec: &SweepSpec, value: f64, run: usize) -> Vec<RunResult> {
    let seed = derive_seed(spec.master_seed, run);
    let scenario = match spec.scenario_for(value) {
        Ok(sc) => ScenarioConfig { rng_seed: seed, ..sc },
        Err(e) => {
            let msg = e.to_string();
            return spec.filters.iter().map(|&f| failed(f, value, run, seed, "", 0, msg.clone())).collect();
        }
    };
    let record = match simulate(&scenario) {
        Ok(r) => r,
        Err(e) => {
            let msg = e.to_string();
            return spec
                .filters
                .iter()
                .map(|&f| failed(f, value, run, seed, "", scenario.horizon, msg.clone()))
                .collect();
        }
    };
    let hash = data_hash(&record);
    spec.filters
        .iter()
        .map(|&f| run_on_record(&scenario, &record, &hash, f, &spec.filter, value, run))
        .collect()
}

/// Runs every `(value, filter, run)` combination on a worker pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, Error> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;

    if spec.warmup {
        pool.install(|| {
            spec.values.par_iter().for_each(|&v| {
                let warm = SweepSpec { master_seed: spec.master_seed ^ 0xA5A5_A5A5, ..spec.clone() };
                let _ = run_cell(&warm, v, 0);
            })
        });
    }

    let cells: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|vi| (0..spec.mc_runs).map(move |run| (vi, run)))
        .collect();
    let mut rows: Vec<(usize, RunResult)> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|&(vi, run)| run_cell(spec, spec.values[vi], run).into_iter().map(move |r| (vi, r)))
            .collect()
    });
    let filter_rank = |f: FilterKind| spec.filters.iter().position(|&g| g == f).unwrap_or(usize::MAX);
    rows.sort_by_key(|(vi, r)| (*vi, filter_rank(r.filter), r.run));
    Ok(SweepResult {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
        expected_rows: spec.expected_rows(),
    })
}
