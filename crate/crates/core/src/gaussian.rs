//! Unscented Gaussian filtering primitives.
//!
//! Every Gaussian integral a filter needs (predictive moments, measurement
//! moments and the posterior residual moment) is approximated with the same
//! 2n+1 point unscented rule. Sigma points are stored as the columns of a
//! matrix, so weighted moments reduce to a couple of matrix products.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::ssm::{is_symmetric, MeasurementModel, ProcessModel};

const JITTER_ATTEMPTS: i32 = 3;
const JITTER_BASE: f64 = 1e-12;

/// Mean and covariance of a Gaussian state density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    /// Validates dimensions, finiteness and symmetry (1e-10 relative).
    ///
    /// Positive definiteness is checked lazily, when sigma points are drawn.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Dimension {
                context: "belief covariance",
                expected: n,
                actual: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("belief".into()));
        }
        if !is_symmetric(&cov, 1e-10) {
            return Err(Error::Domain("belief covariance is not symmetric".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Spread parameters of the scaled unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    /// `λ = α²(n + κ) − n`
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    /// Mean and covariance weights for an n-dimensional state.
    pub fn weights(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let lambda = self.lambda(n);
        let spread = n as f64 + lambda;
        if !(spread > 0.0) {
            return Err(Error::Domain(format!(
                "unscented spread n + lambda must be positive, got {spread}"
            )));
        }
        let wi = 0.5 / spread;
        let mut wm = vec![wi; 2 * n + 1];
        let mut wc = wm.clone();
        wm[0] = lambda / spread;
        wc[0] = lambda / spread + 1.0 - self.alpha * self.alpha + self.beta;
        Ok((wm, wc))
    }
}

/// 2n+1 sigma points (as matrix columns) with their weights.
#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    pub points: DMatrix<f64>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
    pub params: UkfParams,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Evaluates `f` at every point; columns of the result are the images.
    pub fn map<F>(&self, f: F, what: &str) -> Result<DMatrix<f64>>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let mut images: Option<DMatrix<f64>> = None;
        for j in 0..self.len() {
            let img = f(&self.points.column(j).into_owned());
            if img.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} at sigma point {j}")));
            }
            let out = images.get_or_insert_with(|| DMatrix::zeros(img.len(), self.len()));
            if img.len() != out.nrows() {
                return Err(Error::Dimension {
                    context: "sigma point image",
                    expected: out.nrows(),
                    actual: img.len(),
                });
            }
            out.set_column(j, &img);
        }
        Ok(images.unwrap_or_else(|| DMatrix::zeros(0, 0)))
    }

    pub fn weighted_mean(&self, images: &DMatrix<f64>) -> DVector<f64> {
        images * DVector::from_column_slice(&self.mean_weights)
    }

    /// `Σ_j wc_j (a_j − ā)(b_j − b̄)ᵀ`
    pub fn weighted_cross(
        &self,
        a: &DMatrix<f64>,
        a_mean: &DVector<f64>,
        b: &DMatrix<f64>,
        b_mean: &DVector<f64>,
    ) -> DMatrix<f64> {
        let mut da = a.clone();
        for (j, mut col) in da.column_iter_mut().enumerate() {
            col -= a_mean;
            col *= self.cov_weights[j];
        }
        let mut db = b.clone();
        for mut col in db.column_iter_mut() {
            col -= b_mean;
        }
        da * db.transpose()
    }
}

/// Measurement-side moments of the predictive density: `μ`, `U` and `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMoments {
    /// Predicted measurement mean.
    pub mu: DVector<f64>,
    /// Predicted measurement covariance, without measurement noise.
    pub u: DMatrix<f64>,
    /// State/measurement cross-covariance (n×m).
    pub c: DMatrix<f64>,
}

impl MeasurementMoments {
    /// Restriction to the measurement dimensions listed in `keep`.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            mu: self.mu.select_rows(keep),
            u: self.u.select_rows(keep).select_columns(keep),
            c: self.c.select_columns(keep),
        }
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Cholesky factor of a symmetric matrix, retrying with diagonal jitter of
/// `1e-12·tr·I`, `1e-10·tr·I`, `1e-8·tr·I`.
pub fn cholesky_jittered(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch);
    }
    let trace = sym.trace();
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite(what));
    }
    for attempt in 0..JITTER_ATTEMPTS {
        let jitter = JITTER_BASE * 100f64.powi(attempt) * trace;
        let mut jittered = sym.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += jitter;
        }
        if let Some(ch) = jittered.cholesky() {
            return Ok(ch);
        }
    }
    Err(Error::NotPositiveDefinite(what))
}

/// Sigma points `m`, `m ± √(n+λ)·L_i` with `LLᵀ = P` and Wan–van der Merwe
/// weights.
pub fn sigma_points(belief: &GaussianBelief, params: &UkfParams) -> Result<SigmaPointSet> {
    let n = belief.dim();
    let (mean_weights, cov_weights) = params.weights(n)?;
    let chol = cholesky_jittered(&belief.cov, "belief covariance")?;
    let scale = (n as f64 + params.lambda(n)).sqrt();
    let offsets = chol.l() * scale;
    let mut points = DMatrix::zeros(n, 2 * n + 1);
    points.set_column(0, &belief.mean);
    for i in 0..n {
        let col = offsets.column(i);
        points.set_column(1 + i, &(&belief.mean + col));
        points.set_column(1 + n + i, &(&belief.mean - col));
    }
    Ok(SigmaPointSet {
        points,
        mean_weights,
        cov_weights,
        params: *params,
    })
}

/// Predictive density `N(m⁻, P⁻)` of `x_k` given `N(m⁺, P⁺)` of `x_{k−1}`.
pub fn predict(
    belief: &GaussianBelief,
    model: &impl ProcessModel,
    params: &UkfParams,
) -> Result<GaussianBelief> {
    let n = model.state_dim();
    if belief.dim() != n {
        return Err(Error::Dimension {
            context: "predict",
            expected: n,
            actual: belief.dim(),
        });
    }
    let sp = sigma_points(belief, params)?;
    let images = sp.map(|x| model.transition(x), "process model")?;
    let mean = sp.weighted_mean(&images);
    let mut cov = sp.weighted_cross(&images, &mean, &images, &mean) + model.noise_cov();
    symmetrize(&mut cov);
    GaussianBelief::new(mean, cov)
}

/// `μ = E[h(x)]`, `U = Cov[h(x)]` and `C = Cov[x, h(x)]` under the belief.
pub fn measurement_moments(
    belief: &GaussianBelief,
    model: &impl MeasurementModel,
    params: &UkfParams,
) -> Result<MeasurementMoments> {
    if belief.dim() != model.state_dim() {
        return Err(Error::Dimension {
            context: "measurement moments",
            expected: model.state_dim(),
            actual: belief.dim(),
        });
    }
    let sp = sigma_points(belief, params)?;
    let images = sp.map(|x| model.observe(x), "measurement model")?;
    let mu = sp.weighted_mean(&images);
    let mut u = sp.weighted_cross(&images, &mu, &images, &mu);
    symmetrize(&mut u);
    let c = sp.weighted_cross(&sp.points, &belief.mean, &images, &mu);
    Ok(MeasurementMoments { mu, u, c })
}

/// Gaussian update with gain `K = C(U + R_eff)⁻¹`:
/// `m⁺ = m⁻ + K(y − μ)`, `P⁺ = P⁻ − C Kᵀ`.
///
/// The innovation covariance is factorized, never inverted.
pub fn kalman_update(
    belief: &GaussianBelief,
    y: &DVector<f64>,
    mom: &MeasurementMoments,
    r_eff: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    let m = mom.mu.len();
    if y.len() != m {
        return Err(Error::Dimension {
            context: "measurement",
            expected: m,
            actual: y.len(),
        });
    }
    if r_eff.nrows() != m || r_eff.ncols() != m {
        return Err(Error::Dimension {
            context: "effective noise covariance",
            expected: m,
            actual: r_eff.nrows(),
        });
    }
    let mut s = &mom.u + r_eff;
    symmetrize(&mut s);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("innovation covariance".into()));
    }
    let chol = s.clone().cholesky().ok_or_else(|| {
        let sv = s.clone().singular_values();
        let condition = if sv.is_empty() { f64::INFINITY } else { sv.max() / sv.min() };
        Error::SingularInnovation { condition }
    })?;
    let gain_t = chol.solve(&mom.c.transpose());
    let innovation = y - &mom.mu;
    let mean = &belief.mean + gain_t.transpose() * innovation;
    let mut cov = &belief.cov - &mom.c * gain_t;
    symmetrize(&mut cov);
    GaussianBelief::new(mean, cov)
}

/// `W = E[(y − h(x))(y − h(x))ᵀ]` under the (posterior) belief.
///
/// Evaluated as `(y − μ̂)(y − μ̂)ᵀ + Σ_j wc_j (h(χ_j) − μ̂)(h(χ_j) − μ̂)ᵀ`,
/// which is exact whenever `h` is linear.
pub fn posterior_residual_moment(
    belief_post: &GaussianBelief,
    model: &impl MeasurementModel,
    y: &DVector<f64>,
    params: &UkfParams,
) -> Result<DMatrix<f64>> {
    let sp = sigma_points(belief_post, params)?;
    let images = sp.map(|x| model.observe(x), "measurement model")?;
    if y.len() != images.nrows() {
        return Err(Error::Dimension {
            context: "measurement",
            expected: images.nrows(),
            actual: y.len(),
        });
    }
    let mu = sp.weighted_mean(&images);
    let resid = y - &mu;
    let mut w = sp.weighted_cross(&images, &mu, &images, &mu) + &resid * resid.transpose();
    symmetrize(&mut w);
    Ok(w)
}
