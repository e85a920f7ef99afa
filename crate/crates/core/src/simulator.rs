//! TDOA target-tracking scenario.
//!
//! A target follows the coordinated-turn model and is observed by `m` range
//! sensors on a zig-zag line. Differencing every range against sensor 1
//! gives `m − 1` TDOA measurements whose nominal noise is fully correlated
//! through the shared reference. Outliers are drawn per TOA sensor, so a
//! corrupted reference corrupts every TDOA dimension at once.
//!
//! Each random component reads its own ChaCha stream of the scenario seed,
//! so changing λ or γ leaves the trajectory and nominal noise untouched.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::ssm::{coordinated_turn_q, CoordinatedTurn, CoordinatedTurnParams, MeasurementModel, ProcessModel};

/// Spacing of the sensor line in metres.
pub const SENSOR_SPACING: f64 = 350.0;

const STREAM_PROCESS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_CORRUPTION: u64 = 2;
const STREAM_OUTLIER: u64 = 3;
const STREAM_INITIAL: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of TOA sensors `m`; measurements have `m − 1` dimensions.
    pub num_sensors: usize,
    /// Probability λ that a single TOA reading is corrupted.
    pub lambda: f64,
    /// Variance inflation γ of injected outliers.
    pub gamma: f64,
    /// Number of time steps `K`.
    pub horizon: usize,
    /// Per-sensor noise variance σ².
    pub sigma_sq: f64,
    pub motion: CoordinatedTurnParams,
    pub x0: [f64; 5],
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_sensors: 5,
            lambda: 0.0,
            gamma: 1000.0,
            horizon: 100,
            sigma_sq: 10.0,
            motion: CoordinatedTurnParams::default(),
            x0: [0.0, 1.0, 0.0, -1.0, -0.0524],
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sensors < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 sensors, got {}",
                self.num_sensors
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Domain(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma_sq must be positive, got {}",
                self.sigma_sq
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("x0 must be finite".into()));
        }
        CoordinatedTurnParams::new(
            self.motion.sampling_period,
            self.motion.eta1,
            self.motion.eta2,
        )
        .map(|_| ())
    }

    pub fn process_model(&self) -> CoordinatedTurn {
        CoordinatedTurn::new(self.motion)
    }

    pub fn measurement_model(&self) -> TdoaNetwork {
        TdoaNetwork::new(self.num_sensors, self.sigma_sq)
    }

    /// Filter initialization `N(m₀, Q)` for a simulated record.
    pub fn initial_belief(&self, record: &GroundTruthRecord) -> Result<GaussianBelief> {
        GaussianBelief::new(record.initial_mean.clone(), coordinated_turn_q(&self.motion))
    }
}

/// Sensor `i` (1-based) sits at `(350(i−1), 350((i−1) mod 2))`.
pub fn sensor_positions(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|k| (SENSOR_SPACING * k as f64, SENSOR_SPACING * (k % 2) as f64))
        .collect()
}

/// Range to sensor 1 minus range to sensor `j + 1`, for `j = 1, …, m − 1`.
///
/// The gradient is singular when the target sits exactly on a sensor.
pub fn tdoa_measurement(x: &DVector<f64>, positions: &[(f64, f64)]) -> DVector<f64> {
    let range = |(sx, sy): (f64, f64)| (x[0] - sx).hypot(x[2] - sy);
    let reference = range(positions[0]);
    DVector::from_iterator(
        positions.len().saturating_sub(1),
        positions[1..].iter().map(|&s| reference - range(s)),
    )
}

/// Nominal TDOA covariance with equal sensor variances: `σ²(I + 11ᵀ)`.
pub fn nominal_r(m: usize, sigma_sq: f64) -> DMatrix<f64> {
    let d = m.saturating_sub(1);
    DMatrix::from_fn(d, d, |i, j| if i == j { 2.0 * sigma_sq } else { sigma_sq })
}

/// TDOA measurement model over a zig-zag sensor line.
#[derive(Debug, Clone)]
pub struct TdoaNetwork {
    sensors: Vec<(f64, f64)>,
    noise_cov: DMatrix<f64>,
}

impl TdoaNetwork {
    pub fn new(num_sensors: usize, sigma_sq: f64) -> Self {
        Self {
            sensors: sensor_positions(num_sensors),
            noise_cov: nominal_r(num_sensors, sigma_sq),
        }
    }

    pub fn sensors(&self) -> &[(f64, f64)] {
        &self.sensors
    }
}

impl MeasurementModel for TdoaNetwork {
    fn state_dim(&self) -> usize {
        5
    }

    fn meas_dim(&self) -> usize {
        self.sensors.len() - 1
    }

    fn observe(&self, x: &DVector<f64>) -> DVector<f64> {
        tdoa_measurement(x, &self.sensors)
    }

    fn nominal_noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }
}

/// Simulated trajectory, measurements and the outlier ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    /// True states `x_1 … x_K`.
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    /// Per TDOA dimension: corrupted reference or corrupted sensor `j + 1`.
    pub outlier_flags: Vec<Vec<bool>>,
    /// Per TOA sensor corruption draws.
    pub toa_corrupt: Vec<Vec<bool>>,
    /// Filter initial mean, drawn from `N(x₀, Q)`.
    pub initial_mean: DVector<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn standard_normal(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Square root `L` with `LLᵀ = A` for a PSD matrix: Cholesky when it
/// succeeds, otherwise a clipped eigendecomposition.
fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = a.clone().cholesky() {
        return ch.l();
    }
    let eig = a.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Draws one scenario realization; bit-identical for identical configs.
pub fn simulate(config: &ScenarioConfig) -> Result<GroundTruthRecord> {
    config.validate()?;
    let process = config.process_model();
    let meas = config.measurement_model();
    let m = config.num_sensors;
    let d = m - 1;
    let q_sqrt = psd_sqrt(process.noise_cov());
    let r_sqrt = meas
        .nominal_noise_cov()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("nominal TDOA covariance"))?
        .l();
    // γ(σ₁² + σ_j²) with equal variances.
    let outlier_sd = (config.gamma * 2.0 * config.sigma_sq).sqrt();

    let mut rng_process = stream(config.rng_seed, STREAM_PROCESS);
    let mut rng_noise = stream(config.rng_seed, STREAM_NOISE);
    let mut rng_corrupt = stream(config.rng_seed, STREAM_CORRUPTION);
    let mut rng_outlier = stream(config.rng_seed, STREAM_OUTLIER);
    let mut rng_initial = stream(config.rng_seed, STREAM_INITIAL);

    let x0 = DVector::from_row_slice(&config.x0);
    let initial_mean = &x0 + &q_sqrt * standard_normal(&mut rng_initial, 5);

    let mut record = GroundTruthRecord {
        states: Vec::with_capacity(config.horizon),
        measurements: Vec::with_capacity(config.horizon),
        outlier_flags: Vec::with_capacity(config.horizon),
        toa_corrupt: Vec::with_capacity(config.horizon),
        initial_mean,
    };
    let mut x = x0;
    for _ in 0..config.horizon {
        x = process.transition(&x) + &q_sqrt * standard_normal(&mut rng_process, 5);
        let toa: Vec<bool> = (0..m)
            .map(|_| rng_corrupt.random::<f64>() < config.lambda)
            .collect();
        let flags: Vec<bool> = (0..d).map(|j| toa[0] || toa[j + 1]).collect();
        let nominal = &r_sqrt * standard_normal(&mut rng_noise, d);
        // Magnitudes are drawn every step to keep streams aligned across λ.
        let magnitudes = standard_normal(&mut rng_outlier, d) * outlier_sd;
        let mut y = meas.observe(&x) + nominal;
        for j in 0..d {
            if flags[j] {
                y[j] += magnitudes[j];
            }
        }
        record.states.push(x.clone());
        record.measurements.push(y);
        record.outlier_flags.push(flags);
        record.toa_corrupt.push(toa);
    }
    Ok(record)
}

const RECORD_MAGIC: &str = "# tdoa-ground-truth v1";

impl GroundTruthRecord {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.toa_corrupt.first().map_or(0, Vec::len)
    }

    /// Columnar text form, one comma-separated row per time step:
    ///
    /// ```text
    /// # tdoa-ground-truth v1
    /// # initial_mean=<5 comma-separated values>
    /// k,x,vx,y,vy,omega,y1..y{m-1},flag1..flag{m-1},toa1..toa{m}
    /// ```
    ///
    /// Floats use Rust's shortest round-trip formatting; flags are 0/1.
    pub fn to_text(&self) -> String {
        let m = self.num_sensors();
        let d = m.saturating_sub(1);
        let mut out = String::new();
        let join = |v: &DVector<f64>| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let bits = |v: &[bool]| v.iter().map(|b| if *b { "1" } else { "0" }).collect::<Vec<_>>().join(",");
        writeln!(out, "{RECORD_MAGIC}").unwrap();
        writeln!(out, "# initial_mean={}", join(&self.initial_mean)).unwrap();
        let mut header = vec!["k".to_string()];
        header.extend(["x", "vx", "y", "vy", "omega"].map(String::from));
        header.extend((1..=d).map(|j| format!("y{j}")));
        header.extend((1..=d).map(|j| format!("flag{j}")));
        header.extend((1..=m).map(|i| format!("toa{i}")));
        writeln!(out, "{}", header.join(",")).unwrap();
        for k in 0..self.horizon() {
            writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                join(&self.states[k]),
                join(&self.measurements[k]),
                bits(&self.outlier_flags[k]),
                bits(&self.toa_corrupt[k])
            )
            .unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(msg);
        let mut lines = text.lines();
        if lines.next() != Some(RECORD_MAGIC) {
            return Err(bad("missing header line".into()));
        }
        let init_line = lines.next().ok_or_else(|| bad("missing initial mean".into()))?;
        let init = init_line
            .strip_prefix("# initial_mean=")
            .ok_or_else(|| bad(format!("expected initial mean, got `{init_line}`")))?;
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let initial: Vec<f64> = init.split(',').map(parse_f).collect::<Result<_>>()?;
        if initial.len() != 5 {
            return Err(bad(format!("initial mean has {} entries", initial.len())));
        }
        let header = lines.next().ok_or_else(|| bad("missing column header".into()))?;
        let m = header.split(',').filter(|c| c.starts_with("toa")).count();
        if m < 2 {
            return Err(bad(format!("need at least 2 sensors, header has {m}")));
        }
        let d = m - 1;
        let width = 1 + 5 + 2 * d + m;
        if header.split(',').count() != width {
            return Err(bad("column header width does not match sensor count".into()));
        }
        let parse_b = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format!("flag must be 0 or 1, got `{other}`"))),
        };
        let mut record = GroundTruthRecord {
            states: Vec::new(),
            measurements: Vec::new(),
            outlier_flags: Vec::new(),
            toa_corrupt: Vec::new(),
            initial_mean: DVector::from_vec(initial),
        };
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(bad(format!("row {} has {} columns, expected {width}", row + 1, cells.len())));
            }
            let nums: Vec<f64> = cells[1..6 + d].iter().map(|s| parse_f(s)).collect::<Result<_>>()?;
            record.states.push(DVector::from_row_slice(&nums[..5]));
            record.measurements.push(DVector::from_row_slice(&nums[5..]));
            record
                .outlier_flags
                .push(cells[6 + d..6 + 2 * d].iter().map(|s| parse_b(s)).collect::<Result<_>>()?);
            record
                .toa_corrupt
                .push(cells[6 + 2 * d..].iter().map(|s| parse_b(s)).collect::<Result<_>>()?);
        }
        Ok(record)
    }
}
