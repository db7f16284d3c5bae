//! Incremental least squares on integer-time monomial features.
//!
//! [`VawState`] is the Vovk-Azoury-Warmuth forecaster: the Gram matrix absorbs the
//! feature of round `t` before its label is revealed, and the inverse
//! `(I + sum x x^T)^{-1}` is maintained with Sherman-Morrison updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rank-one updates between two from-scratch refactorizations of `A^{-1}`.
pub const REFRESH_INTERVAL: usize = 256;

/// `[1, t_rel, t_rel^2, ..., t_rel^k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialFeature {
    t_rel: usize,
    values: Vec<f64>,
}

impl MonomialFeature {
    pub fn new(t_rel: usize, k: usize) -> Result<Self> {
        if t_rel == 0 {
            return Err(Error::dim("relative time is 1-based"));
        }
        let t = t_rel as f64;
        let mut values = Vec::with_capacity(k + 1);
        let mut p = 1.0;
        for _ in 0..=k {
            values.push(p);
            p *= t;
        }
        Ok(Self { t_rel, values })
    }

    pub fn t_rel(&self) -> usize {
        self.t_rel
    }

    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// State of one VAW forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct VawState {
    k: usize,
    a_inv: DMatrix<f64>,
    gram: DMatrix<f64>,
    b: DVector<f64>,
    count: usize,
    since_refresh: usize,
}

impl VawState {
    pub fn new(k: usize) -> Self {
        let d = k + 1;
        Self {
            k,
            a_inv: DMatrix::identity(d, d),
            gram: DMatrix::zeros(d, d),
            b: DVector::zeros(d),
            count: 0,
            since_refresh: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(I + sum x x^T)^{-1}` over every absorbed feature.
    pub fn a_inv(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    /// `I + sum x x^T`.
    pub fn a(&self) -> DMatrix<f64> {
        DMatrix::identity(self.k + 1, self.k + 1) + &self.gram
    }

    /// `sum y x` over every absorbed label.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of absorbed labels.
    pub fn count(&self) -> usize {
        self.count
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k + 1 {
            return Err(Error::dim(format!(
                "feature of length {} for a VAW state of order {}",
                x.len(),
                self.k
            )));
        }
        Ok(())
    }

    /// Adds `x x^T` to the Gram matrix.
    pub fn absorb_feature(&mut self, x: &[f64]) -> Result<()> {
        self.check(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        let x = DVector::from_column_slice(x);
        let u = &self.a_inv * &x;
        let denom = 1.0 + x.dot(&u);
        self.a_inv -= (&u * u.transpose()) / denom;
        self.gram += &x * x.transpose();
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        }
        Ok(())
    }

    pub fn absorb_label(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check(x)?;
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += y * xi;
        }
        self.count += 1;
        Ok(())
    }

    /// `x^T A^{-1} b`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let x = DVector::from_column_slice(x);
        Ok(x.dot(&(&self.a_inv * &self.b)))
    }

    /// Recomputes `A^{-1}` from the accumulated Gram matrix.
    ///
    /// Monomial Gram matrices span many orders of magnitude, so the factorization runs
    /// on the Jacobi-scaled matrix `D^{-1} A D^{-1}` and is scaled back afterwards.
    pub fn refresh(&mut self) -> Result<()> {
        let a = self.a();
        let d: Vec<f64> = a.diagonal().iter().map(|v| v.sqrt()).collect();
        let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / (d[i] * d[j]));
        let chol = scaled
            .cholesky()
            .ok_or_else(|| Error::Numerical("VAW Gram matrix lost definiteness".into()))?;
        let inv = chol.inverse();
        self.a_inv = DMatrix::from_fn(inv.nrows(), inv.ncols(), |i, j| inv[(i, j)] / (d[i] * d[j]));
        self.since_refresh = 0;
        Ok(())
    }
}

/// Residual of the least-squares polynomial fit of degree `k` to `y`, using the
/// features of consecutive times.
///
/// The fit uses polynomials orthogonal on the sample points, generated by the
/// three-term (Stieltjes) recurrence, and is applied twice for accuracy.
pub fn recenter(y: &[f64], k: usize) -> Result<Vec<f64>> {
    let len = y.len();
    if len < k + 1 {
        return Err(Error::dim(format!(
            "recentering with degree {k} needs at least {} values, got {len}",
            k + 1
        )));
    }
    let basis = orthogonal_polynomials(len, k + 1);
    let mut r = y.to_vec();
    for _ in 0..2 {
        for p in &basis {
            let c: f64 = p.iter().zip(&r).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(p).for_each(|(v, q)| *v -= c * q);
        }
    }
    Ok(r)
}

/// Orthonormal discrete polynomials of degree `< dims` on `len` equispaced points.
fn orthogonal_polynomials(len: usize, dims: usize) -> Vec<Vec<f64>> {
    let half = (len as f64 - 1.0) / 2.0;
    let x: Vec<f64> = (0..len)
        .map(|i| if half > 0.0 { (i as f64 - half) / half } else { 0.0 })
        .collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut p = vec![1.0 / (len as f64).sqrt(); len];
    let mut prev = vec![0.0; len];
    let mut prev_norm = 0.0;
    for _ in 0..dims {
        out.push(p.clone());
        if out.len() == dims {
            break;
        }
        // p is normalized, so a = <x p, p> and the previous term has weight prev_norm
        let a: f64 = x.iter().zip(&p).map(|(xi, pi)| xi * pi * pi).sum();
        let mut q: Vec<f64> = x
            .iter()
            .zip(&p)
            .zip(&prev)
            .map(|((xi, pi), ri)| (xi - a) * pi - prev_norm * ri)
            .collect();
        for o in &out {
            let c: f64 = o.iter().zip(&q).map(|(u, v)| u * v).sum();
            q.iter_mut().zip(o).for_each(|(v, u)| *v -= c * u);
        }
        let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= nq);
        prev_norm = nq;
        prev = std::mem::replace(&mut p, q);
    }
    out
}

/// Least-squares coefficients on the raw features `[1, i, ..., i^k]`, `i = 1..=len`.
pub fn ols_coefficients(y: &[f64], k: usize) -> Result<Vec<f64>> {
    let len = y.len();
    if len < k + 1 {
        return Err(Error::dim("fewer observations than coefficients"));
    }
    // Solve in column-scaled coordinates, then undo the scaling.
    let raw = DMatrix::from_fn(len, k + 1, |i, p| ((i + 1) as f64).powi(p as i32));
    let norms: Vec<f64> = raw.column_iter().map(|c| c.norm()).collect();
    let scaled = DMatrix::from_fn(len, k + 1, |i, p| raw[(i, p)] / norms[p]);
    let qr = scaled.qr();
    let rhs = qr.q().transpose() * DVector::from_column_slice(y);
    let coef = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numerical("rank-deficient design".into()))?;
    Ok(coef.iter().zip(&norms).map(|(c, n)| c / n).collect())
}

/// `det(X^T X)` for `X` with rows `[1, i, ..., i^{m-1}]`, `i = 1..=t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinant {
    pub value: f64,
    /// Natural log of `value`; `-inf` when the design is rank deficient.
    pub log_value: f64,
}

pub const MAX_DETERMINANT_ORDER: usize = 5;
pub const MAX_DETERMINANT_TIME: usize = 200;

pub fn design_determinant(t: usize, m: usize) -> Result<Determinant> {
    if t == 0 || m == 0 {
        return Err(Error::dim("design determinant needs t >= 1 and m >= 1"));
    }
    if m > MAX_DETERMINANT_ORDER || t > MAX_DETERMINANT_TIME {
        return Err(Error::dim(format!(
            "design determinant limited to m <= {MAX_DETERMINANT_ORDER}, t <= {MAX_DETERMINANT_TIME}"
        )));
    }
    if t < m {
        // rank(X) = t < m
        return Ok(Determinant {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
        });
    }
    let raw = DMatrix::from_fn(t, m, |i, p| ((i + 1) as f64).powi(p as i32));
    let norms: Vec<f64> = raw.column_iter().map(|c| c.norm()).collect();
    let scaled = DMatrix::from_fn(t, m, |i, p| raw[(i, p)] / norms[p]);
    let r = scaled.qr().r();
    let log_value: f64 = (0..m)
        .map(|i| 2.0 * (r[(i, i)].abs().ln() + norms[i].ln()))
        .sum();
    Ok(Determinant {
        value: log_value.exp(),
        log_value,
    })
}

/// The root structure `t^m * prod_{i=2}^m (t^2 - (i-1)^2)^{m-i+1}` of `det(X^T X)`.
pub fn determinant_root_factor(t: usize, m: usize) -> f64 {
    let tf = t as f64;
    let mut v = tf.powi(m as i32);
    for i in 2..=m {
        let r = (i - 1) as f64;
        v *= (tf * tf - r * r).powi((m - i + 1) as i32);
    }
    v
}
