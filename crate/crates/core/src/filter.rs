//! EM outlier-robust filter step and baseline filters.
//!
//! One time step of the robust filter:
//!
//! 1. unscented prediction of the state;
//! 2. reset of the outlier state: all indicators nominal, rate at its
//!    configured initial value;
//! 3. EM loop until the normalized change of the posterior mean drops below
//!    the threshold: Gaussian update with `R(ℐ̂)`, residual moment `W`,
//!    rate update, then an ascending coordinate sweep over the indicators.
//!
//! Measurement moments of the prediction do not depend on `ℐ̂` and are
//! computed once per step; only the residual moment is re-propagated after
//! every posterior update.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gaussian::{
    kalman_update, measurement_moments, posterior_residual_moment, predict, GaussianBelief,
    UkfParams,
};
use crate::robust::{build_r, sweep_indicators, update_rate, IndicatorVector, OutlierModelParams};
use crate::ssm::{MeasurementModel, ProcessModel};

/// Outlier-model hyperparameters shared by all dimensions and time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierPrior {
    /// Gamma shape `a`.
    pub shape: f64,
    /// Rate `b̂` every time step starts from.
    pub initial_rate: f64,
    /// `A`
    pub rate_prior_shape: f64,
    /// `B`
    pub rate_prior_rate: f64,
    /// `θ`, applied to every dimension.
    pub no_outlier_prob: f64,
}

impl Default for OutlierPrior {
    fn default() -> Self {
        Self {
            shape: 1.0,
            initial_rate: 10_000.0,
            rate_prior_shape: 10_000.0,
            rate_prior_rate: 1_000.0,
            no_outlier_prob: 0.5,
        }
    }
}

impl OutlierPrior {
    /// Fresh per-step parameters for an m-dimensional measurement.
    pub fn params(&self, m: usize) -> Result<OutlierModelParams> {
        OutlierModelParams::new(
            self.shape,
            self.initial_rate,
            self.rate_prior_shape,
            self.rate_prior_rate,
            vec![self.no_outlier_prob; m],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub outlier: OutlierPrior,
    pub convergence_threshold: f64,
    pub max_em_iterations: usize,
    pub ukf: UkfParams,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            outlier: OutlierPrior::default(),
            convergence_threshold: 1e-4,
            max_em_iterations: 100,
            ukf: UkfParams::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::Domain(format!(
                "convergence threshold must be positive, got {}",
                self.convergence_threshold
            )));
        }
        if self.max_em_iterations == 0 {
            return Err(Error::Domain("max_em_iterations must be at least 1".into()));
        }
        self.outlier.params(1).map(|_| ())
    }
}

/// What happened inside one EM filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub em_iterations: usize,
    /// Indicators used by the Gaussian update of each iteration.
    pub indicator_history: Vec<IndicatorVector>,
    pub final_indicators: IndicatorVector,
    pub final_rate: f64,
    /// Normalized change of the posterior mean, one entry per iteration.
    pub convergence_history: Vec<f64>,
    pub converged: bool,
}

/// `‖new − prev‖ / ‖prev‖`, or the absolute norm when `‖prev‖ < 1e-12`.
pub fn relative_change(prev_mean: &DVector<f64>, new_mean: &DVector<f64>) -> f64 {
    let diff = (new_mean - prev_mean).norm();
    let base = prev_mean.norm();
    if base < 1e-12 {
        diff
    } else {
        diff / base
    }
}

pub fn converged(prev_mean: &DVector<f64>, new_mean: &DVector<f64>, threshold: f64) -> bool {
    relative_change(prev_mean, new_mean) < threshold
}

fn em_step(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    cfg: &FilterConfig,
    learn_rate: bool,
) -> Result<(GaussianBelief, StepDiagnostics)> {
    cfg.validate()?;
    let predicted = predict(prior, process, &cfg.ukf)?;
    let moments = measurement_moments(&predicted, meas, &cfg.ukf)?;
    let r_nom = meas.nominal_noise_cov();
    let mut params = cfg.outlier.params(meas.meas_dim())?;
    let mut indicators = IndicatorVector::ones(meas.meas_dim());

    let mut prev_mean = predicted.mean.clone();
    let mut indicator_history = Vec::new();
    let mut convergence_history = Vec::new();
    let mut is_converged = false;
    let mut posterior = predicted.clone();

    for _ in 0..cfg.max_em_iterations {
        indicator_history.push(indicators.clone());
        let r_eff = build_r(&indicators, r_nom)?;
        posterior = kalman_update(&predicted, y, &moments, &r_eff)?;
        let change = relative_change(&prev_mean, &posterior.mean);
        convergence_history.push(change);

        let w = posterior_residual_moment(&posterior, meas, y, &cfg.ukf)?;
        if learn_rate {
            params.rate = update_rate(&indicators, &params)?;
        }
        sweep_indicators(&mut indicators, &w, r_nom, &params)?;

        prev_mean = posterior.mean.clone();
        if change < cfg.convergence_threshold {
            is_converged = true;
            break;
        }
    }

    let diagnostics = StepDiagnostics {
        em_iterations: convergence_history.len(),
        indicator_history,
        final_indicators: indicators,
        final_rate: params.rate,
        convergence_history,
        converged: is_converged,
    };
    Ok((posterior, diagnostics))
}

/// One step of the EM outlier-robust filter with online rate learning.
pub fn emorf2_step(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    cfg: &FilterConfig,
) -> Result<(GaussianBelief, StepDiagnostics)> {
    em_step(prior, y, process, meas, cfg, true)
}

/// Ablation of [`emorf2_step`]: the rate stays at its initial value.
pub fn frozen_b_step(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    cfg: &FilterConfig,
) -> Result<(GaussianBelief, StepDiagnostics)> {
    em_step(prior, y, process, meas, cfg, false)
}

/// Standard UKF step with the nominal noise covariance.
pub fn plain_ukf_step(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    cfg: &FilterConfig,
) -> Result<GaussianBelief> {
    let predicted = predict(prior, process, &cfg.ukf)?;
    let moments = measurement_moments(&predicted, meas, &cfg.ukf)?;
    kalman_update(&predicted, y, &moments, meas.nominal_noise_cov())
}

/// UKF that knows which dimensions are corrupted and drops them from the
/// update. With every dimension flagged the prediction is returned.
pub fn ideal_ukf_step(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    outlier_flags: &[bool],
    cfg: &FilterConfig,
) -> Result<GaussianBelief> {
    if outlier_flags.len() != meas.meas_dim() {
        return Err(Error::Dimension {
            context: "outlier flags",
            expected: meas.meas_dim(),
            actual: outlier_flags.len(),
        });
    }
    let predicted = predict(prior, process, &cfg.ukf)?;
    let keep: Vec<usize> = (0..outlier_flags.len()).filter(|&i| !outlier_flags[i]).collect();
    if keep.is_empty() {
        return Ok(predicted);
    }
    let moments = measurement_moments(&predicted, meas, &cfg.ukf)?.select(&keep);
    let r = meas
        .nominal_noise_cov()
        .select_rows(&keep)
        .select_columns(&keep);
    kalman_update(&predicted, &y.select_rows(&keep), &moments, &r)
}

/// Registered filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Emorf2,
    FrozenRate,
    PlainUkf,
    IdealUkf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::Emorf2,
        FilterKind::FrozenRate,
        FilterKind::PlainUkf,
        FilterKind::IdealUkf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Emorf2 => "emorf2",
            FilterKind::FrozenRate => "frozen_b",
            FilterKind::PlainUkf => "plain_ukf",
            FilterKind::IdealUkf => "ideal_ukf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown filter `{s}` (expected one of emorf2, frozen_b, plain_ukf, ideal_ukf)"
                ))
            })
    }
}

/// Output of a filter run over a whole measurement sequence.
#[derive(Debug, Clone)]
pub struct TrajectoryEstimate {
    /// Posterior after each measurement.
    pub posteriors: Vec<GaussianBelief>,
    /// Gaussian updates performed; one per step for the non-EM filters.
    pub em_iterations_total: usize,
    pub nonconverged_steps: usize,
    /// Per-step diagnostics of the EM filters; empty otherwise.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl TrajectoryEstimate {
    pub fn means(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.posteriors.iter().map(|b| &b.mean)
    }
}

/// Runs `kind` over `measurements`. `outlier_flags` is only read by the
/// ideal filter. Errors carry the 1-based time step.
pub fn run_filter(
    kind: FilterKind,
    initial: &GaussianBelief,
    measurements: &[DVector<f64>],
    outlier_flags: &[Vec<bool>],
    process: &impl ProcessModel,
    meas: &impl MeasurementModel,
    cfg: &FilterConfig,
) -> Result<TrajectoryEstimate> {
    if kind == FilterKind::IdealUkf && outlier_flags.len() != measurements.len() {
        return Err(Error::Dimension {
            context: "outlier flag sequence",
            expected: measurements.len(),
            actual: outlier_flags.len(),
        });
    }
    let mut belief = initial.clone();
    let mut out = TrajectoryEstimate {
        posteriors: Vec::with_capacity(measurements.len()),
        em_iterations_total: 0,
        nonconverged_steps: 0,
        diagnostics: Vec::new(),
    };
    for (k, y) in measurements.iter().enumerate() {
        let step = match kind {
            FilterKind::Emorf2 | FilterKind::FrozenRate => {
                let res = if kind == FilterKind::Emorf2 {
                    emorf2_step(&belief, y, process, meas, cfg)
                } else {
                    frozen_b_step(&belief, y, process, meas, cfg)
                };
                res.map(|(b, diag)| {
                    out.em_iterations_total += diag.em_iterations;
                    if !diag.converged {
                        out.nonconverged_steps += 1;
                    }
                    out.diagnostics.push(diag);
                    b
                })
            }
            FilterKind::PlainUkf => {
                out.em_iterations_total += 1;
                plain_ukf_step(&belief, y, process, meas, cfg)
            }
            FilterKind::IdealUkf => {
                out.em_iterations_total += 1;
                ideal_ukf_step(&belief, y, process, meas, &outlier_flags[k], cfg)
            }
        };
        belief = step.map_err(|e| e.at_step(k + 1))?;
        out.posteriors.push(belief.clone());
    }
    Ok(out)
}
