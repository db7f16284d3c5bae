use serde::{Deserialize, Serialize};

/// Outcome of one forecasting run.
///
/// `regret` is the dynamic regret `sum (prediction - theta)^2` when the ground truth
/// is known, and `sum (prediction - y)^2` otherwise. `beta` and `sigma` are `null`
/// for forecasters that do not use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub regret: f64,
    pub n: usize,
    pub k: usize,
    pub num_bins: usize,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub wallclock_ms: f64,
}

/// `sum (a - b)^2`.
pub fn squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}
