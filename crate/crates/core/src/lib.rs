//! Outlier-robust Bayesian filtering for nonlinear state-space models whose
//! nominal measurement noise is correlated.
//!
//! The crate is organised bottom-up:
//!
//! - [`ssm`]: process/measurement model abstractions and the coordinated-turn
//!   motion model.
//! - [`gaussian`]: unscented (sigma-point) prediction, measurement moments,
//!   Kalman-form update and the posterior residual moment.
//! - [`robust`]: the outlier model. Indicator-scaled covariance, its
//!   structured inverse, the per-dimension indicator decision and the
//!   conjugate update of the outlier rate.
//! - [`filter`]: the EM filter step that binds the above, plus baseline
//!   filters used for comparison.
//! - [`simulator`]: TDOA tracking scenario with correlated nominal noise and
//!   injected outliers.

pub mod error;
pub mod filter;
pub mod gaussian;
pub mod robust;
pub mod simulator;
pub mod ssm;

pub use error::{Error, Result};
pub use filter::{FilterConfig, FilterKind, StepDiagnostics};
pub use gaussian::{GaussianBelief, MeasurementMoments, SigmaPointSet, UkfParams};
pub use robust::{IndicatorVector, OutlierModelParams};
pub use simulator::{GroundTruthRecord, ScenarioConfig, TdoaNetwork};
pub use ssm::{CoordinatedTurn, CoordinatedTurnParams, MeasurementModel, ProcessModel};
