//! State-space model abstractions and the planar coordinated-turn model.
//!
//! Models are described by a deterministic map plus an additive Gaussian
//! noise covariance. Filters only ever evaluate the maps at sigma points, so
//! no Jacobians are required.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Below this turn rate the coordinated-turn matrix is evaluated through its
/// Taylor expansion in ω.
pub const SMALL_TURN_RATE: f64 = 1e-8;

/// Additive-noise process model `x_k = f(x_{k-1}) + q_{k-1}`, `q ~ N(0, Q)`.
pub trait ProcessModel {
    fn state_dim(&self) -> usize;

    fn transition(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Process noise covariance `Q`, symmetric positive semi-definite.
    fn noise_cov(&self) -> &DMatrix<f64>;
}

/// Additive-noise measurement model `y_k = h(x_k) + r_k`, `r ~ N(0, R)`.
///
/// `R` is the *nominal* covariance; it may be fully populated.
pub trait MeasurementModel {
    fn state_dim(&self) -> usize;

    fn meas_dim(&self) -> usize;

    fn observe(&self, x: &DVector<f64>) -> DVector<f64>;

    fn nominal_noise_cov(&self) -> &DMatrix<f64>;
}

/// Process model backed by a closure.
pub struct FnProcess<F> {
    dim: usize,
    f: F,
    noise_cov: DMatrix<f64>,
}

impl<F> FnProcess<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    pub fn new(dim: usize, f: F, noise_cov: DMatrix<f64>) -> Result<Self> {
        check_square(&noise_cov, dim, "process noise covariance")?;
        check_psd(&noise_cov, "process noise covariance")?;
        Ok(Self { dim, f, noise_cov })
    }
}

impl<F> ProcessModel for FnProcess<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }
}

/// Measurement model backed by a closure.
pub struct FnMeasurement<H> {
    state_dim: usize,
    h: H,
    noise_cov: DMatrix<f64>,
}

impl<H> FnMeasurement<H>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    pub fn new(state_dim: usize, h: H, noise_cov: DMatrix<f64>) -> Result<Self> {
        check_square(&noise_cov, noise_cov.nrows(), "measurement noise covariance")?;
        check_spd(&noise_cov, "measurement noise covariance")?;
        Ok(Self {
            state_dim,
            h,
            noise_cov,
        })
    }
}

impl<H> MeasurementModel for FnMeasurement<H>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn meas_dim(&self) -> usize {
        self.noise_cov.nrows()
    }

    fn observe(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.h)(x)
    }

    fn nominal_noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }
}

/// Parameters of the discrete-time coordinated-turn model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatedTurnParams {
    /// Sampling period ζ in seconds.
    pub sampling_period: f64,
    /// Noise intensity η₁ of the two position/velocity blocks.
    pub eta1: f64,
    /// Noise intensity η₂ of the turn rate.
    pub eta2: f64,
}

impl CoordinatedTurnParams {
    pub fn new(sampling_period: f64, eta1: f64, eta2: f64) -> Result<Self> {
        if !(sampling_period > 0.0 && sampling_period.is_finite()) {
            return Err(Error::Domain(format!(
                "sampling period must be positive, got {sampling_period}"
            )));
        }
        if !(eta1 >= 0.0 && eta1.is_finite()) || !(eta2 >= 0.0 && eta2.is_finite()) {
            return Err(Error::Domain(format!(
                "noise intensities must be non-negative, got eta1={eta1}, eta2={eta2}"
            )));
        }
        Ok(Self {
            sampling_period,
            eta1,
            eta2,
        })
    }
}

impl Default for CoordinatedTurnParams {
    fn default() -> Self {
        Self {
            sampling_period: 1.0,
            eta1: 0.1,
            eta2: 1.75e-4,
        }
    }
}

/// One step of the coordinated-turn model for `x = [x, ẋ, y, ẏ, ω]`.
///
/// The turn rate is carried unchanged. For `|ω| < SMALL_TURN_RATE` the
/// ω-dependent entries are replaced by their second-order expansions, which
/// keeps the map continuous through ω = 0.
pub fn coordinated_turn_transition(
    x: &DVector<f64>,
    params: &CoordinatedTurnParams,
) -> Result<DVector<f64>> {
    if x.len() != 5 {
        return Err(Error::Dimension {
            context: "coordinated-turn state",
            expected: 5,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "coordinated-turn state must be finite, got {:?}",
            x.as_slice()
        )));
    }
    Ok(transition_unchecked(x, params.sampling_period))
}

fn transition_unchecked(x: &DVector<f64>, dt: f64) -> DVector<f64> {
    let omega = x[4];
    let (sin_wt, cos_wt) = (omega * dt).sin_cos();
    // a = sin(ωζ)/ω, b = (1 − cos(ωζ))/ω
    let (a, b) = if omega.abs() < SMALL_TURN_RATE {
        (
            dt - omega * omega * dt.powi(3) / 6.0,
            omega * dt * dt / 2.0,
        )
    } else {
        // 1 − cos(θ) = 2 sin²(θ/2) avoids cancellation for small θ.
        let half = (0.5 * omega * dt).sin();
        (sin_wt / omega, 2.0 * half * half / omega)
    };
    let (px, vx, py, vy) = (x[0], x[1], x[2], x[3]);
    DVector::from_vec(vec![
        px + a * vx - b * vy,
        cos_wt * vx - sin_wt * vy,
        py + b * vx + a * vy,
        sin_wt * vx + cos_wt * vy,
        omega,
    ])
}

/// Block-diagonal process noise `diag(η₁M, η₁M, η₂)` with
/// `M = [[ζ³/3, ζ²/2], [ζ²/2, ζ]]`.
pub fn coordinated_turn_q(params: &CoordinatedTurnParams) -> DMatrix<f64> {
    let dt = params.sampling_period;
    let m = [[dt.powi(3) / 3.0, dt * dt / 2.0], [dt * dt / 2.0, dt]];
    let mut q = DMatrix::zeros(5, 5);
    for block in 0..2 {
        let o = 2 * block;
        for r in 0..2 {
            for c in 0..2 {
                q[(o + r, o + c)] = params.eta1 * m[r][c];
            }
        }
    }
    q[(4, 4)] = params.eta2;
    q
}

/// Coordinated-turn process model with time-invariant noise.
#[derive(Debug, Clone)]
pub struct CoordinatedTurn {
    params: CoordinatedTurnParams,
    noise_cov: DMatrix<f64>,
}

impl CoordinatedTurn {
    pub fn new(params: CoordinatedTurnParams) -> Self {
        Self {
            noise_cov: coordinated_turn_q(&params),
            params,
        }
    }

    pub fn params(&self) -> &CoordinatedTurnParams {
        &self.params
    }
}

impl ProcessModel for CoordinatedTurn {
    fn state_dim(&self) -> usize {
        5
    }

    // Non-finite inputs propagate as NaN; the filters check their outputs.
    fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        transition_unchecked(x, self.params.sampling_period)
    }

    fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }
}

pub(crate) fn check_square(m: &DMatrix<f64>, dim: usize, what: &'static str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Dimension {
            context: what,
            expected: dim,
            actual: if m.nrows() != dim { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    (m - m.transpose()).iter().all(|d| d.abs() <= rel_tol * scale)
}

/// Symmetric with eigenvalues no lower than `-1e-12 * trace`.
pub fn check_psd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    if !is_symmetric(m, 1e-12) {
        return Err(Error::Domain(format!("{what} is not symmetric")));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let floor = -1e-12 * m.trace().abs();
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < floor {
        return Err(Error::Domain(format!(
            "{what} has negative eigenvalue {min_eig:e}"
        )));
    }
    Ok(())
}

pub fn check_spd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    if !is_symmetric(m, 1e-12) {
        return Err(Error::Domain(format!("{what} is not symmetric")));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(())
}
