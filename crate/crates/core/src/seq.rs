//! Sequences, discrete difference operators, variational functionals and losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth and/or noisy observations over a horizon of `n` steps.
///
/// Accessors are 1-based: `theta_at(1)` is the first ground-truth value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    theta: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
    n: usize,
}

impl TimeSeries {
    pub fn new(theta: Option<Vec<f64>>, y: Option<Vec<f64>>) -> Result<Self> {
        let n = match (&theta, &y) {
            (None, None) => {
                return Err(Error::dim("time series needs ground truth or observations"))
            }
            (Some(t), None) => t.len(),
            (None, Some(y)) => y.len(),
            (Some(t), Some(y)) => {
                if t.len() != y.len() {
                    return Err(Error::dim(format!(
                        "theta has {} entries but y has {}",
                        t.len(),
                        y.len()
                    )));
                }
                t.len()
            }
        };
        if n == 0 {
            return Err(Error::dim("time series horizon must be positive"));
        }
        Ok(Self { theta, y, n })
    }

    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        Self::new(Some(theta), None)
    }

    pub fn from_observations(y: Vec<f64>) -> Result<Self> {
        Self::new(None, Some(y))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn theta_at(&self, t: usize) -> Option<f64> {
        index_1(self.theta.as_deref(), t)
    }

    pub fn y_at(&self, t: usize) -> Option<f64> {
        index_1(self.y.as_deref(), t)
    }

    /// Observations `y[s..=e]`, 1-based and inclusive.
    pub fn y_range(&self, s: usize, e: usize) -> Option<&[f64]> {
        let y = self.y.as_deref()?;
        if s == 0 || s > e || e > y.len() {
            return None;
        }
        Some(&y[s - 1..e])
    }

    /// Replaces the observations, keeping the ground truth.
    pub fn with_observations(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n {
            return Err(Error::dim(format!(
                "observation length {} does not match horizon {}",
                y.len(),
                self.n
            )));
        }
        self.y = Some(y);
        Ok(self)
    }
}

fn index_1(v: Option<&[f64]>, t: usize) -> Option<f64> {
    let v = v?;
    if t == 0 {
        return None;
    }
    v.get(t - 1).copied()
}

/// Difference operator of order `order`: first differences applied `order` times.
pub fn diff_op(x: &[f64], order: usize) -> Result<Vec<f64>> {
    if x.len() <= order {
        return Err(Error::dim(format!(
            "difference of order {order} needs more than {order} points, got {}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    for _ in 0..order {
        for i in 0..out.len() - 1 {
            out[i] = out[i + 1] - out[i];
        }
        out.pop();
    }
    Ok(out)
}

/// `n^k * ||D^{k+1} theta||_1`.
pub fn tv_k(theta: &[f64], k: usize) -> Result<f64> {
    check_tv_len(theta.len(), k)?;
    let d = diff_op(theta, k + 1)?;
    Ok(scale(theta.len(), k) * d.iter().map(|v| v.abs()).sum::<f64>())
}

fn check_tv_len(n: usize, k: usize) -> Result<()> {
    if n < k + 2 {
        return Err(Error::dim(format!(
            "TV of order {k} needs at least {} points, got {n}",
            k + 2
        )));
    }
    Ok(())
}

fn scale(n: usize, k: usize) -> f64 {
    (n as f64).powi(k as i32)
}

/// Absolute tolerance below which an entry of `D^{k+1} theta` counts as zero.
pub fn jump_tolerance(theta: &[f64]) -> f64 {
    let sup = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-10 * sup.max(1.0)
}

/// The four smoothness functionals of one sequence, all computed from the same
/// `D^{k+1} theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalProfile {
    pub k: usize,
    /// `n^k ||D^{k+1} theta||_1`
    pub tv_k: f64,
    /// `n^k ||D^{k+1} theta||_2`
    pub sobolev: f64,
    /// `n^k ||D^{k+1} theta||_inf`
    pub holder: f64,
    /// `||D^{k+1} theta||_0`, counted with [`jump_tolerance`].
    pub jumps: usize,
}

pub fn variational_profile(theta: &[f64], k: usize) -> Result<VariationalProfile> {
    check_tv_len(theta.len(), k)?;
    let d = diff_op(theta, k + 1)?;
    let s = scale(theta.len(), k);
    let eps = jump_tolerance(theta);
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut linf = 0.0f64;
    let mut jumps = 0;
    for v in &d {
        let a = v.abs();
        l1 += a;
        l2 += a * a;
        linf = linf.max(a);
        if a > eps {
            jumps += 1;
        }
    }
    // Sub-tolerance residue is floating noise, not variation.
    if jumps == 0 {
        l1 = 0.0;
        l2 = 0.0;
        linf = 0.0;
    }
    Ok(VariationalProfile {
        k,
        tv_k: s * l1,
        sobolev: s * l2.sqrt(),
        holder: s * linf,
        jumps,
    })
}

/// Per-step losses with minimum 0 at the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Squared,
    Huber { omega: f64 },
    Logcosh,
    EpsLogistic { eps: f64 },
}

impl Loss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::Huber { omega } if !(omega > 0.0 && omega.is_finite()) => {
                Err(Error::config(format!("huber width must be positive, got {omega}")))
            }
            Loss::EpsLogistic { eps } if !(eps >= 0.0 && eps.is_finite()) => Err(Error::config(
                format!("logistic insensitivity must be nonnegative, got {eps}"),
            )),
            _ => Ok(()),
        }
    }

    /// Lipschitz constant of the loss derivative. `None` for the squared loss,
    /// which is the reference the others are compared against.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Loss::Squared => None,
            Loss::Huber { .. } | Loss::Logcosh => Some(1.0),
            Loss::EpsLogistic { .. } => Some(0.5),
        }
    }

    pub fn eval(&self, x: f64, theta_t: f64) -> Result<f64> {
        self.validate()?;
        let d = x - theta_t;
        Ok(match *self {
            Loss::Squared => d * d,
            Loss::Huber { omega } => {
                if d.abs() <= omega {
                    0.5 * d * d
                } else {
                    omega * (d.abs() - 0.5 * omega)
                }
            }
            // log cosh(d) = |d| + log(1 + e^{-2|d|}) - log 2, stable for large |d|
            Loss::Logcosh => {
                let a = d.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
            Loss::EpsLogistic { eps } => {
                softplus(d - eps) + softplus(-d - eps) - 2.0 * softplus(-eps)
            }
        })
    }

    /// Sum of per-coordinate losses.
    pub fn eval_vec(&self, x: &[f64], theta_t: &[f64]) -> Result<f64> {
        if x.len() != theta_t.len() {
            return Err(Error::dim("loss arguments differ in length"));
        }
        x.iter()
            .zip(theta_t)
            .map(|(&a, &b)| self.eval(a, b))
            .sum()
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
