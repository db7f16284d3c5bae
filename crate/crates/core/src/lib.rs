//! Online forecasting of sequences with bounded higher-order total variation.
//!
//! The crate is organised bottom-up:
//!
//! - [`seq`]: sequences, discrete difference operators, variational functionals and losses.
//! - [`wavelet`]: orthonormal dyadic wavelet bases with `k + 1` vanishing moments,
//!   soft thresholding, `pack` and MAD noise estimation.
//! - [`regress`]: the Vovk-Azoury-Warmuth forecaster, polynomial recentering and
//!   design-matrix determinants.
//! - [`policy`]: the Ada-VAW restart loop, the EWA meta-policy over TV orders and the
//!   multi-dimensional runner.
//! - [`baselines`]: moving average, (restarting) online gradient descent and the offline
//!   wavelet soft-threshold estimator.
//! - [`generators`]: synthetic ground truth for every sequence class and noise models.
//!
//! Time is 1-based at every public boundary: `t = 1` is the first observation.

pub mod baselines;
pub mod error;
pub mod generators;
pub mod policy;
pub mod regress;
pub mod report;
pub mod seq;
pub mod wavelet;

pub use error::{Error, Result};
pub use report::RegretReport;
