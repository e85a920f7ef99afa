//! Outlier model for correlated measurement noise.
//!
//! Each measurement dimension `i` carries a positive indicator `ℐ^i`. The
//! value exactly `1.0` marks a nominal dimension; any other value marks an
//! outlier and scales that dimension's variance by `1/ℐ^i` while cutting
//! its correlation with every other dimension. Outlier indicators are
//! Gamma(a, b) distributed and the rate `b` has a conjugate Gamma(A, B)
//! prior, which lets the filter learn the outlier scale online.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-dimension outlier indicators; `1.0` means nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorVector(Vec<f64>);

impl IndicatorVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "indicators must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    /// All dimensions nominal.
    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    // Nominal and outlier branches are disjoint: only an exact 1.0 is nominal.
    #[allow(clippy::float_cmp)]
    pub fn is_nominal(&self, i: usize) -> bool {
        self.0[i] == 1.0
    }

    pub fn outlier_count(&self) -> usize {
        (0..self.len()).filter(|&i| !self.is_nominal(i)).count()
    }

    pub(crate) fn set(&mut self, i: usize, value: f64) {
        debug_assert!(value > 0.0);
        self.0[i] = value;
    }

    /// Copy with entry `i` replaced.
    pub fn with(&self, i: usize, value: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = value;
        Self::new(v)
    }

    /// Copy with entry `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(i);
        Self(v)
    }
}

/// Hyperparameters of the outlier model together with the current rate
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierModelParams {
    /// Gamma shape `a` of outlier indicators.
    pub shape: f64,
    /// Current estimate `b̂` of the Gamma rate.
    pub rate: f64,
    /// Shape `A` of the Gamma prior on the rate.
    pub rate_prior_shape: f64,
    /// Rate `B` of the Gamma prior on the rate.
    pub rate_prior_rate: f64,
    /// Prior probability `θ^i` that dimension `i` is outlier-free.
    pub no_outlier_prob: Vec<f64>,
}

impl OutlierModelParams {
    pub fn new(
        shape: f64,
        rate: f64,
        rate_prior_shape: f64,
        rate_prior_rate: f64,
        no_outlier_prob: Vec<f64>,
    ) -> Result<Self> {
        // a > 0.5 keeps the outlier value (a + 0.5 − 1)/β positive.
        if !(shape > 0.5 && shape.is_finite()) {
            return Err(Error::Domain(format!("shape a must exceed 0.5, got {shape}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("rate must be positive, got {rate}")));
        }
        if !(rate_prior_shape > 1.0 && rate_prior_shape.is_finite()) {
            return Err(Error::Domain(format!(
                "rate prior shape A must exceed 1, got {rate_prior_shape}"
            )));
        }
        if !(rate_prior_rate > 0.0 && rate_prior_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "rate prior rate B must be positive, got {rate_prior_rate}"
            )));
        }
        if let Some(t) = no_outlier_prob.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Domain(format!(
                "no-outlier probability must lie in (0, 1), got {t}"
            )));
        }
        Ok(Self {
            shape,
            rate,
            rate_prior_shape,
            rate_prior_rate,
            no_outlier_prob,
        })
    }

    /// `α = a + 1/2`, the posterior shape of an outlier indicator.
    pub fn posterior_shape(&self) -> f64 {
        self.shape + 0.5
    }
}

fn check_inputs(indicators: &IndicatorVector, r_nom: &DMatrix<f64>) -> Result<()> {
    let m = indicators.len();
    if r_nom.nrows() != m || r_nom.ncols() != m {
        return Err(Error::Dimension {
            context: "nominal noise covariance",
            expected: m,
            actual: r_nom.nrows(),
        });
    }
    if let Some(bad) = indicators.as_slice().iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("indicator must be positive, got {bad}")));
    }
    Ok(())
}

/// Indicator-scaled covariance `R(ℐ)`: diagonal `R^{ii}/ℐ^i`, off-diagonal
/// `R^{ij}` only when both `i` and `j` are nominal.
pub fn build_r(indicators: &IndicatorVector, r_nom: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(indicators, r_nom)?;
    let m = indicators.len();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            r_nom[(i, i)] / indicators.get(i)
        } else if indicators.is_nominal(i) && indicators.is_nominal(j) {
            r_nom[(i, j)]
        } else {
            0.0
        }
    }))
}

/// Inverse and log-determinant of `R(ℐ)`.
///
/// Outlier dimensions are decoupled and handled elementwise; only the
/// nominal sub-block is factorized.
pub fn invert_r(indicators: &IndicatorVector, r_nom: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_inputs(indicators, r_nom)?;
    let m = indicators.len();
    let (nominal, outlying): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&i| indicators.is_nominal(i));

    let mut inverse = DMatrix::zeros(m, m);
    let mut log_det = 0.0;
    for &i in &outlying {
        let var = r_nom[(i, i)] / indicators.get(i);
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::Domain(format!(
                "outlier variance of dimension {i} is {var}"
            )));
        }
        inverse[(i, i)] = 1.0 / var;
        log_det += var.ln();
    }
    if !nominal.is_empty() {
        let block = r_nom.select_rows(&nominal).select_columns(&nominal);
        let chol = block
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("nominal noise sub-block"))?;
        log_det += 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let block_inv = chol.inverse();
        for (a, &i) in nominal.iter().enumerate() {
            for (b, &j) in nominal.iter().enumerate() {
                inverse[(i, j)] = block_inv[(a, b)];
            }
        }
    }
    Ok((inverse, log_det))
}

/// `ln|R(ℐ)|` and `tr(W R(ℐ)⁻¹)` over the dimensions `nominal ∪ outlying`,
/// touching only those rows of `W` and `R`.
fn log_det_and_trace(
    nominal: &[usize],
    outlying: &[usize],
    indicators: &IndicatorVector,
    w: &DMatrix<f64>,
    r_nom: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let mut log_det = 0.0;
    let mut trace = 0.0;
    for &o in outlying {
        let var = r_nom[(o, o)] / indicators.get(o);
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::Domain(format!("outlier variance of dimension {o} is {var}")));
        }
        log_det += var.ln();
        trace += w[(o, o)] / var;
    }
    if !nominal.is_empty() {
        let n = nominal.len();
        let block = DMatrix::from_fn(n, n, |a, b| r_nom[(nominal[a], nominal[b])]);
        let chol = block
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("nominal noise sub-block"))?;
        log_det += 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inv = chol.inverse();
        for (b, &j) in nominal.iter().enumerate() {
            for (a, &i) in nominal.iter().enumerate() {
                trace += w[(i, j)] * inv[(a, b)];
            }
        }
    }
    Ok((log_det, trace))
}

/// Log-domain terms of the indicator decision for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionTerms {
    /// Log evidence of the nominal branch, `ln H`.
    pub ln_nominal: f64,
    /// Log evidence of the Gamma branch integrated over `ℐ^i`, `ln G`.
    pub ln_outlier: f64,
    /// Mode `(α − 1)/β` of the Gamma branch.
    pub outlier_value: f64,
}

impl DecisionTerms {
    pub fn is_nominal(&self) -> bool {
        self.ln_nominal - self.ln_outlier >= 0.0
    }

    pub fn decision(&self) -> f64 {
        if self.is_nominal() {
            1.0
        } else {
            self.outlier_value
        }
    }
}

/// Evidence of both branches for indicator `i`, the others held at their
/// current estimates.
///
/// Nominal: `ln H = −½ ln|R(1, ℐ^{-i})| − ½ tr(W R⁻¹(1, ℐ^{-i})) + ln θ^i`.
///
/// Outlier: `ln G = −½ ln R^{ii} − ½ ln|R̂^{-i,-i}| − ½ tr(W^{-i,-i} (R̂^{-i,-i})⁻¹)
///   + ln(1 − θ^i) + ln Γ(α) + a ln b̂ − ln Γ(a) − α ln β^i`
/// with `α = a + ½` and `β^i = b̂ + ½ W^{ii}/R^{ii}`.
pub fn decision_terms(
    i: usize,
    indicators: &IndicatorVector,
    w: &DMatrix<f64>,
    r_nom: &DMatrix<f64>,
    params: &OutlierModelParams,
) -> Result<DecisionTerms> {
    check_inputs(indicators, r_nom)?;
    let m = indicators.len();
    if i >= m {
        return Err(Error::Domain(format!("dimension {i} out of range for m = {m}")));
    }
    if w.nrows() != m || w.ncols() != m {
        return Err(Error::Dimension {
            context: "residual moment",
            expected: m,
            actual: w.nrows(),
        });
    }
    if params.no_outlier_prob.len() != m {
        return Err(Error::Dimension {
            context: "no-outlier probabilities",
            expected: m,
            actual: params.no_outlier_prob.len(),
        });
    }
    let theta = params.no_outlier_prob[i];
    let a = params.shape;
    let alpha = params.posterior_shape();
    let r_ii = r_nom[(i, i)];
    let beta = params.rate + 0.5 * w[(i, i)] / r_ii;

    let (mut nominal, outlying): (Vec<usize>, Vec<usize>) =
        (0..m).filter(|&j| j != i).partition(|&j| indicators.is_nominal(j));
    let (log_det_rest, trace_rest) = log_det_and_trace(&nominal, &outlying, indicators, w, r_nom)?;
    nominal.push(i);
    let (log_det_full, trace_full) = log_det_and_trace(&nominal, &outlying, indicators, w, r_nom)?;
    let ln_nominal = -0.5 * log_det_full - 0.5 * trace_full + theta.ln();
    if !ln_nominal.is_finite() {
        return Err(Error::NonFinite(format!("ln H for dimension {i}")));
    }

    let ln_outlier = -0.5 * r_ii.ln() - 0.5 * log_det_rest - 0.5 * trace_rest
        + (1.0 - theta).ln()
        + log_gamma(alpha)?
        + a * params.rate.ln()
        - log_gamma(a)?
        - alpha * beta.ln();
    if !ln_outlier.is_finite() {
        return Err(Error::NonFinite(format!("ln G for dimension {i}")));
    }

    Ok(DecisionTerms {
        ln_nominal,
        ln_outlier,
        outlier_value: (alpha - 1.0) / beta,
    })
}

/// M-step for indicator `i`: `1` if `ln H ≥ ln G`, else `(α − 1)/β^i`.
pub fn indicator_decision(
    i: usize,
    indicators: &IndicatorVector,
    w: &DMatrix<f64>,
    r_nom: &DMatrix<f64>,
    params: &OutlierModelParams,
) -> Result<f64> {
    decision_terms(i, indicators, w, r_nom, params).map(|t| t.decision())
}

/// Coordinate sweep `i = 0, 1, …, m−1`, each decision seeing the freshest
/// values of the others.
pub fn sweep_indicators(
    indicators: &mut IndicatorVector,
    w: &DMatrix<f64>,
    r_nom: &DMatrix<f64>,
    params: &OutlierModelParams,
) -> Result<()> {
    for i in 0..indicators.len() {
        let value = indicator_decision(i, indicators, w, r_nom, params)?;
        indicators.set(i, value);
    }
    Ok(())
}

/// M-step for the outlier rate: `b̂ = (Ā − 1)/B̄` with `Ā = M·a + A` and
/// `B̄ = B + Σ_{ℐ^i ≠ 1} ℐ^i`, `M` counting the outlier dimensions.
pub fn update_rate(indicators: &IndicatorVector, params: &OutlierModelParams) -> Result<f64> {
    let outliers: Vec<f64> = (0..indicators.len())
        .filter(|&i| !indicators.is_nominal(i))
        .map(|i| indicators.get(i))
        .collect();
    let shape_bar = outliers.len() as f64 * params.shape + params.rate_prior_shape;
    let rate_bar = params.rate_prior_rate + outliers.iter().sum::<f64>();
    if !(shape_bar > 1.0) {
        return Err(Error::Domain(format!(
            "posterior rate shape must exceed 1, got {shape_bar}"
        )));
    }
    Ok((shape_bar - 1.0) / rate_bar)
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("log-gamma needs x > 0, got {x}")));
    }
    Ok(libm::lgamma(x))
}
