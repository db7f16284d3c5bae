//! Log-log least-squares fits of regret against horizon.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MIN_POINTS: usize = 4;
/// Required ratio between the largest and smallest horizon.
pub const MIN_SPAN: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(ln n, ln regret)` pairs the line was fitted to.
    pub points: Vec<(f64, f64)>,
}

/// Fits `ln regret = slope * ln n + intercept` to `(n, regret)` pairs.
pub fn fit_scaling(data: &[(usize, f64)]) -> Result<ScalingFit> {
    if data.len() < MIN_POINTS {
        return Err(HarnessError::config(format!(
            "scaling fit needs at least {MIN_POINTS} horizons, got {}",
            data.len()
        )));
    }
    if let Some((n, r)) = data.iter().find(|(n, r)| *n == 0 || !(*r > 0.0 && r.is_finite())) {
        return Err(HarnessError::config(format!(
            "scaling fit needs positive horizon and regret, got ({n}, {r})"
        )));
    }
    let lo = data.iter().map(|d| d.0).min().unwrap_or(0) as f64;
    let hi = data.iter().map(|d| d.0).max().unwrap_or(0) as f64;
    if hi < MIN_SPAN * lo {
        return Err(HarnessError::config(format!(
            "horizons must span at least {MIN_SPAN}x, got {lo}..{hi}"
        )));
    }
    let points: Vec<(f64, f64)> = data
        .iter()
        .map(|&(n, r)| ((n as f64).ln(), r.ln()))
        .collect();
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    // a flat line through flat data is a perfect fit
    let r2 = if ss_tot <= f64::EPSILON * my.abs().max(1.0) * m {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
        points,
    })
}
