//! Comparator forecasters and the offline wavelet soft-threshold estimator.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::recenter;
use crate::report::{squared_error, RegretReport};
use crate::wavelet::{min_length, pack, CoefficientVector, DwtBasis};

/// A forecaster driven one round at a time.
pub trait Forecaster {
    fn predict(&mut self) -> f64;
    fn observe(&mut self, y: f64);
}

/// Mean of the last `w` observations, 0 before the first one.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    buf: VecDeque<f64>,
    sum: f64,
}

impl MovingAverage {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("moving-average window must be at least 1"));
        }
        Ok(Self {
            window,
            buf: VecDeque::with_capacity(window),
            sum: 0.0,
        })
    }
}

impl Forecaster for MovingAverage {
    fn predict(&mut self) -> f64 {
        if self.buf.is_empty() {
            0.0
        } else {
            // Recomputing keeps long streams free of drift in the running sum.
            if self.buf.len() == self.window {
                self.sum = self.buf.iter().sum();
            }
            self.sum / self.buf.len() as f64
        }
    }

    fn observe(&mut self, y: f64) {
        if self.buf.len() == self.window {
            if let Some(old) = self.buf.pop_front() {
                self.sum -= old;
            }
        }
        self.buf.push_back(y);
        self.sum += y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `1 / (2 t)`, the strong-convexity step for squared loss.
    InverseTime,
    Constant { eta: f64 },
}

impl StepSchedule {
    fn step(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseTime => 1.0 / (2.0 * t as f64),
            StepSchedule::Constant { eta } => eta,
        }
    }

    fn validate(&self) -> Result<()> {
        if let StepSchedule::Constant { eta } = *self {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::config(format!("OGD step must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Projected online gradient descent on `(x - y)^2` over `[-B, B]`, started at 0.
#[derive(Debug, Clone)]
pub struct Ogd {
    bound: f64,
    schedule: StepSchedule,
    x: f64,
    t: usize,
}

impl Ogd {
    pub fn new(bound: f64, schedule: StepSchedule) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::config("OGD bound must be positive"));
        }
        schedule.validate()?;
        Ok(Self {
            bound,
            schedule,
            x: 0.0,
            t: 0,
        })
    }

    pub fn reset(&mut self) {
        self.x = 0.0;
        self.t = 0;
    }
}

impl Forecaster for Ogd {
    fn predict(&mut self) -> f64 {
        self.x
    }

    fn observe(&mut self, y: f64) {
        self.t += 1;
        let grad = 2.0 * (self.x - y);
        self.x = (self.x - self.schedule.step(self.t) * grad).clamp(-self.bound, self.bound);
    }
}

/// OGD with the `1 / (2 t)` schedule, restarted from 0 every `batch_len` rounds.
#[derive(Debug, Clone)]
pub struct RestartingOgd {
    batch_len: usize,
    inner: Ogd,
}

impl RestartingOgd {
    pub fn new(bound: f64, batch_len: usize) -> Result<Self> {
        if batch_len == 0 {
            return Err(Error::config("restarting-OGD batch length must be at least 1"));
        }
        Ok(Self {
            batch_len,
            inner: Ogd::new(bound, StepSchedule::InverseTime)?,
        })
    }
}

impl Forecaster for RestartingOgd {
    fn predict(&mut self) -> f64 {
        self.inner.predict()
    }

    fn observe(&mut self, y: f64) {
        self.inner.observe(y);
        if self.inner.t == self.batch_len {
            self.inner.reset();
        }
    }
}

/// `ceil(sqrt(n / max(1, c_n)))`.
pub fn restarting_ogd_batch_len(n: usize, c_n: f64) -> usize {
    ((n as f64 / c_n.max(1.0)).sqrt().ceil() as usize).max(1)
}

/// Offline denoiser: wavelet transform, soft threshold of the detail coefficients
/// at `sigma * sqrt(2 log n)`, inverse transform.
///
/// Lengths that are not powers of two are split with [`pack`]; the two estimates are
/// averaged where they overlap. Sequences too short for a basis of order `k` get
/// their least-squares polynomial fit.
pub fn offline_wavelet_estimate(y: &[f64], k: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("sigma must be nonnegative, got {sigma}")));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::dim("empty stream"));
    }
    if n < min_length(k) {
        let r = recenter(y, k.min(n - 1))?;
        return Ok(y.iter().zip(&r).map(|(a, b)| a - b).collect());
    }
    let lambda = sigma * (2.0 * (n.max(2) as f64).ln()).sqrt();
    let (first, second) = pack(y)?;
    let seg = first.len();
    let basis = DwtBasis::cached(seg, k)?;
    let smooth = |x: &[f64]| -> Result<Vec<f64>> {
        let c = basis.forward(x)?;
        let mut v = c.into_values();
        for (val, level) in v.iter_mut().zip(basis.level_of_row()) {
            if level.is_some() {
                *val = crate::wavelet::soft_threshold_scalar(*val, lambda);
            }
        }
        basis.inverse(&CoefficientVector::new(v, seg)?)
    };
    let a = smooth(first)?;
    if seg == n {
        return Ok(a);
    }
    let b = smooth(second)?;
    let mut out = vec![0.0; n];
    let mut count = vec![0u8; n];
    for (i, v) in a.into_iter().enumerate() {
        out[i] += v;
        count[i] += 1;
    }
    for (i, v) in b.into_iter().enumerate() {
        out[n - seg + i] += v;
        count[n - seg + i] += 1;
    }
    for (o, c) in out.iter_mut().zip(count) {
        *o /= c as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineConfig {
    MovingAverage { window: usize },
    Ogd { bound: f64, step_schedule: StepSchedule },
    RestartingOgd { bound: f64, batch_len: usize },
    /// Needs the whole stream up front; reports `sum (estimate - theta)^2`.
    OfflineWavelet { k: usize, sigma: f64 },
}

impl BaselineConfig {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineConfig::MovingAverage { .. } => "moving_average",
            BaselineConfig::Ogd { .. } => "ogd",
            BaselineConfig::RestartingOgd { .. } => "restarting_ogd",
            BaselineConfig::OfflineWavelet { .. } => "offline_wavelet",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineConfig::MovingAverage { window } => MovingAverage::new(window).map(|_| ()),
            BaselineConfig::Ogd { bound, step_schedule } => Ogd::new(bound, step_schedule).map(|_| ()),
            BaselineConfig::RestartingOgd { bound, batch_len } => {
                RestartingOgd::new(bound, batch_len).map(|_| ())
            }
            BaselineConfig::OfflineWavelet { sigma, .. } => {
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(format!("sigma must be nonnegative, got {sigma}")))
                }
            }
        }
    }

    fn forecaster(&self) -> Result<Option<Box<dyn Forecaster>>> {
        Ok(match *self {
            BaselineConfig::MovingAverage { window } => Some(Box::new(MovingAverage::new(window)?)),
            BaselineConfig::Ogd { bound, step_schedule } => {
                Some(Box::new(Ogd::new(bound, step_schedule)?))
            }
            BaselineConfig::RestartingOgd { bound, batch_len } => {
                Some(Box::new(RestartingOgd::new(bound, batch_len)?))
            }
            BaselineConfig::OfflineWavelet { .. } => None,
        })
    }
}

/// Predictions (online baselines) or estimates (offline wavelet) for a full stream.
pub fn baseline_predictions(config: &BaselineConfig, y: &[f64]) -> Result<Vec<f64>> {
    config.validate()?;
    match config.forecaster()? {
        Some(mut f) => Ok(y
            .iter()
            .map(|&yt| {
                let p = f.predict();
                f.observe(yt);
                p
            })
            .collect()),
        None => match *config {
            BaselineConfig::OfflineWavelet { k, sigma } => offline_wavelet_estimate(y, k, sigma),
            _ => unreachable!("online baselines handled above"),
        },
    }
}

pub fn run_baseline(
    config: &BaselineConfig,
    y: &[f64],
    theta: Option<&[f64]>,
    seed: u64,
) -> Result<(RegretReport, Vec<f64>)> {
    if y.is_empty() {
        return Err(Error::dim("empty stream"));
    }
    if let Some(th) = theta {
        if th.len() != y.len() {
            return Err(Error::dim(format!(
                "ground truth has {} values, stream has {}",
                th.len(),
                y.len()
            )));
        }
    }
    let start = Instant::now();
    let preds = baseline_predictions(config, y)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let k = match *config {
        BaselineConfig::OfflineWavelet { k, .. } => k,
        _ => 0,
    };
    let report = RegretReport {
        regret: squared_error(&preds, theta.unwrap_or(y)),
        n: y.len(),
        k,
        num_bins: match *config {
            BaselineConfig::RestartingOgd { batch_len, .. } => y.len().div_ceil(batch_len),
            _ => 1,
        },
        beta: None,
        sigma: match *config {
            BaselineConfig::OfflineWavelet { sigma, .. } => Some(sigma),
            _ => None,
        },
        seed,
        wallclock_ms: elapsed,
    };
    Ok((report, preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn moving_average_window_one_lags() {
        let y = [0.3, -1.0, 2.5, 4.0];
        let p = baseline_predictions(&BaselineConfig::MovingAverage { window: 1 }, &y).unwrap();
        assert_eq!(p, vec![0.0, 0.3, -1.0, 2.5]);
    }

    #[test]
    fn moving_average_window_three() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = baseline_predictions(&BaselineConfig::MovingAverage { window: 3 }, &y).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 1.5, 2.0, 3.0]);
    }

    #[test]
    fn inverse_time_ogd_is_running_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-0.5..0.5)).collect();
        let p = baseline_predictions(
            &BaselineConfig::Ogd { bound: 1.0, step_schedule: StepSchedule::InverseTime },
            &y,
        )
        .unwrap();
        for t in 1..y.len() {
            let mean = y[..t].iter().sum::<f64>() / t as f64;
            assert!((p[t] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn ogd_projects() {
        let p = baseline_predictions(
            &BaselineConfig::Ogd { bound: 1.0, step_schedule: StepSchedule::Constant { eta: 0.5 } },
            &[10.0, 10.0],
        )
        .unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn restarting_ogd_resets() {
        let y = [1.0, 1.0, 1.0, 5.0, 5.0];
        let p = baseline_predictions(&BaselineConfig::RestartingOgd { bound: 10.0, batch_len: 3 }, &y)
            .unwrap();
        assert_eq!(p, vec![0.0, 1.0, 1.0, 0.0, 5.0]);
    }

    #[test]
    fn batch_len_default() {
        assert_eq!(restarting_ogd_batch_len(1024, 4.0), 16);
        assert_eq!(restarting_ogd_batch_len(1000, 0.0), 32);
        assert_eq!(restarting_ogd_batch_len(1, 5.0), 1);
    }

    #[test]
    fn offline_wavelet_keeps_polynomials() {
        for &n in &[64usize, 100, 1000] {
            for k in 0..=3 {
                let theta: Vec<f64> = (0..n)
                    .map(|i| {
                        let x = i as f64 / n as f64;
                        (0..=k).map(|j| 0.3 * x.powi(j as i32)).sum()
                    })
                    .collect();
                let est = offline_wavelet_estimate(&theta, k, 0.5).unwrap();
                assert!(squared_error(&est, &theta) / (n as f64) < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(BaselineConfig::MovingAverage { window: 0 }.validate().is_err());
        assert!(BaselineConfig::RestartingOgd { bound: 1.0, batch_len: 0 }.validate().is_err());
        assert!(BaselineConfig::OfflineWavelet { k: 1, sigma: -1.0 }.validate().is_err());
        assert!(run_baseline(&BaselineConfig::MovingAverage { window: 2 }, &[1.0], Some(&[1.0, 2.0]), 0)
            .is_err());
    }

    // On a stationary segment the k-th step of a batch has expected error
    // sigma^2 / (k - 1), so the per-step average error must not increase after the first.
    #[test]
    fn inverse_time_error_nonincreasing_within_batches() {
        let sigma = 0.5;
        let theta = 0.8;
        let batch = 16;
        let reps = 4000;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut acc = vec![0.0; batch];
        for r in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(r);
            let y: Vec<f64> = (0..batch * 4).map(|_| theta + normal.sample(&mut rng)).collect();
            let p = baseline_predictions(
                &BaselineConfig::RestartingOgd { bound: 2.0, batch_len: batch },
                &y,
            )
            .unwrap();
            for (i, v) in p.iter().enumerate() {
                acc[i % batch] += (v - theta).powi(2) / (4 * reps) as f64;
            }
        }
        for i in 1..batch {
            let want = sigma * sigma / i as f64;
            assert!((acc[i] - want).abs() < 0.1 * want, "step {i}: {} vs {want}", acc[i]);
        }
        for i in 1..batch {
            assert!(acc[i] <= acc[i - 1] * 1.05);
        }
        let mut prefix_avg = Vec::new();
        let mut cum = 0.0;
        for (i, a) in acc.iter().enumerate() {
            cum += a;
            prefix_avg.push(cum / (i + 1) as f64);
        }
        for i in 1..batch {
            assert!(prefix_avg[i] <= prefix_avg[i - 1]);
        }
    }
}
