//! TOML configuration shared by all subcommands.
//!
//! Every key is optional; missing keys take the benchmark defaults and
//! unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use emorf_core::filter::OutlierPrior;
use emorf_core::{CoordinatedTurnParams, Error, FilterConfig, FilterKind, ScenarioConfig, UkfParams};
use serde::{Deserialize, Serialize};

use crate::harness::{SweepSpec, SweepVariable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub num_sensors: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub sigma_sq: f64,
    pub sampling_period: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub x0: [f64; 5],
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let sc = ScenarioConfig::default();
        Self {
            num_sensors: sc.num_sensors,
            lambda: sc.lambda,
            gamma: sc.gamma,
            horizon: sc.horizon,
            sigma_sq: sc.sigma_sq,
            sampling_period: sc.motion.sampling_period,
            eta1: sc.motion.eta1,
            eta2: sc.motion.eta2,
            x0: sc.x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    /// Gamma shape `a`.
    pub shape: f64,
    /// Rate `b̂` each step starts from.
    pub initial_rate: f64,
    /// `A`
    pub rate_prior_shape: f64,
    /// `B`
    pub rate_prior_rate: f64,
    /// `θ`
    pub no_outlier_prob: f64,
    pub convergence_threshold: f64,
    pub max_em_iterations: usize,
    pub ukf_alpha: f64,
    pub ukf_beta: f64,
    pub ukf_kappa: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let cfg = FilterConfig::default();
        Self {
            shape: cfg.outlier.shape,
            initial_rate: cfg.outlier.initial_rate,
            rate_prior_shape: cfg.outlier.rate_prior_shape,
            rate_prior_rate: cfg.outlier.rate_prior_rate,
            no_outlier_prob: cfg.outlier.no_outlier_prob,
            convergence_threshold: cfg.convergence_threshold,
            max_em_iterations: cfg.max_em_iterations,
            ukf_alpha: cfg.ukf.alpha,
            ukf_beta: cfg.ukf.beta,
            ukf_kappa: cfg.ukf.kappa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Scenario seed for `simulate`/`run`, master seed for sweeps.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Filters used by `run` and `sweep`.
    pub filters: Vec<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            filters: FilterKind::ALL.iter().map(|f| f.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `lambda` or `m`.
    pub variable: String,
    pub values: Vec<f64>,
    pub mc_runs: usize,
    /// One discarded run per (value, filter) before timing.
    pub warmup: bool,
    /// Write the wall-time column to results.csv.
    pub include_timing: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: "lambda".into(),
            values: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            mc_runs: 100,
            warmup: false,
            include_timing: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfigFile {
    pub scenario: ScenarioSection,
    pub filter: FilterSection,
    pub run: RunSection,
    pub sweep: SweepSection,
}

impl CliConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Domain(format!("invalid configuration: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, Error> {
        let s = &self.scenario;
        let sc = ScenarioConfig {
            num_sensors: s.num_sensors,
            lambda: s.lambda,
            gamma: s.gamma,
            horizon: s.horizon,
            sigma_sq: s.sigma_sq,
            motion: CoordinatedTurnParams::new(s.sampling_period, s.eta1, s.eta2)?,
            x0: s.x0,
            rng_seed: self.run.seed,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn filter_config(&self) -> Result<FilterConfig, Error> {
        let f = &self.filter;
        let cfg = FilterConfig {
            outlier: OutlierPrior {
                shape: f.shape,
                initial_rate: f.initial_rate,
                rate_prior_shape: f.rate_prior_shape,
                rate_prior_rate: f.rate_prior_rate,
                no_outlier_prob: f.no_outlier_prob,
            },
            convergence_threshold: f.convergence_threshold,
            max_em_iterations: f.max_em_iterations,
            ukf: UkfParams {
                alpha: f.ukf_alpha,
                beta: f.ukf_beta,
                kappa: f.ukf_kappa,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filters(&self) -> Result<Vec<FilterKind>, Error> {
        parse_filters(&self.run.filters)
    }

    /// Sweep described by the `[sweep]` section, or by a figure preset.
    pub fn sweep_spec(&self, figure: Figure) -> Result<SweepSpec, Error> {
        let mut scenario = self.scenario()?;
        let (variable, values) = match figure {
            Figure::Custom => (self.sweep.variable.parse()?, self.sweep.values.clone()),
            Figure::Fig1 => {
                scenario.num_sensors = 5;
                scenario.gamma = 1000.0;
                (SweepVariable::Lambda, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
            }
            Figure::Fig2 | Figure::Fig3 => {
                scenario.lambda = 0.4;
                scenario.gamma = 1000.0;
                (SweepVariable::Sensors, vec![5.0, 10.0, 15.0, 20.0])
            }
        };
        let spec = SweepSpec {
            variable,
            values,
            scenario,
            filter: self.filter_config()?,
            mc_runs: self.sweep.mc_runs,
            filters: self.filters()?,
            master_seed: self.run.seed,
            // Timing needs a quiet machine: one worker and a warm-up run.
            jobs: if figure == Figure::Fig3 { 1 } else { self.run.jobs },
            warmup: figure == Figure::Fig3 || self.sweep.warmup,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_filters<S: AsRef<str>>(names: &[S]) -> Result<Vec<FilterKind>, Error> {
    if names.is_empty() {
        return Err(Error::Domain("no filters requested".into()));
    }
    let mut out = Vec::new();
    for name in names {
        let kind: FilterKind = name.as_ref().trim().parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// λ sweep at m = 5.
    Fig1,
    /// m sweep at λ = 0.4.
    Fig2,
    /// m sweep for timing, run sequentially.
    Fig3,
    /// Whatever the `[sweep]` section says.
    Custom,
}

impl Figure {
    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Custom => "custom",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "custom" => Ok(Figure::Custom),
            other => Err(Error::Domain(format!("unknown figure `{other}`"))),
        }
    }
}
