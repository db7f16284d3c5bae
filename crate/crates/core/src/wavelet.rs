//! Orthonormal dyadic wavelet transforms with `k + 1` vanishing moments.
//!
//! The basis is built directly as a discrete multiresolution on `length` points:
//!
//! - the first rows span the discrete polynomials of degree `<= k` on the whole interval;
//! - detail rows at level `j` live on dyadic blocks of `length / 2^j` points. On each
//!   block they span the piecewise polynomials (degree `<= k`) on the two half blocks,
//!   minus the polynomials on the whole block. Blocks shorter than `k + 1` points hold
//!   every vector, so the finest levels complete the basis.
//!
//! Every detail row is therefore orthogonal to all polynomials of degree `<= k`, supported
//! on a single block of its level, and the rows form an orthonormal basis of `R^length`.
//! For `k = 0` this is exactly the Haar system. It plays the role of a boundary-corrected
//! (CDJV-type) wavelet matrix of regularity `k + 1`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

/// Number of rows in the coarse block: `2^ceil(log2(k + 1))`.
pub fn coarse_count(k: usize) -> usize {
    (k + 1).next_power_of_two()
}

/// Smallest basis length usable for order `k`.
pub fn min_length(k: usize) -> usize {
    2 * coarse_count(k)
}

/// One basis row stored over its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub offset: usize,
    pub values: Vec<f64>,
}

impl SparseRow {
    fn dot(&self, x: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&x[self.offset..self.offset + self.values.len()])
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn support(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtBasis {
    length: usize,
    k: usize,
    coarse_count: usize,
    rows: Vec<SparseRow>,
    /// `None` for the polynomial rows, `Some(j)` for detail rows on blocks of
    /// `length >> j` points.
    level_of_row: Vec<Option<usize>>,
    /// Two-scale relations, finest block size first.
    pyramid: Vec<TwoScale>,
}

/// How one block of `2 * half` points is expressed through the polynomial
/// coefficients of its two halves.
#[derive(Debug, Clone, PartialEq)]
struct TwoScale {
    /// Dimension of the polynomial space on each half.
    fine: usize,
    /// Dimension of the polynomial space on the block.
    coarse: usize,
    /// `coarse x 2 fine`, row-major.
    scaling: Vec<f64>,
    /// `details x 2 fine`, row-major.
    detail: Vec<f64>,
    /// Index of the first detail row of this level in `rows`.
    first_row: usize,
}

impl TwoScale {
    fn new(block: usize, k: usize, first_row: usize) -> Self {
        let half = block / 2;
        let fine = half.min(k + 1);
        let local = poly_basis(half, fine);
        let split = |v: &[f64]| -> Vec<f64> {
            let mut c = Vec::with_capacity(2 * fine);
            for side in 0..2 {
                let part = &v[side * half..(side + 1) * half];
                c.extend(local.iter().map(|q| dot(q, part)));
            }
            c
        };
        let coarse_rows = poly_basis(block, block.min(k + 1));
        Self {
            fine,
            coarse: coarse_rows.len(),
            scaling: coarse_rows.iter().flat_map(|v| split(v)).collect(),
            detail: detail_template(block, k).iter().flat_map(|v| split(v)).collect(),
            first_row,
        }
    }
}

impl DwtBasis {
    pub fn build(length: usize, k: usize) -> Result<Self> {
        if length == 0 || !length.is_power_of_two() {
            return Err(Error::dim(format!(
                "basis length must be a power of two, got {length}"
            )));
        }
        if length < min_length(k) {
            return Err(Error::dim(format!(
                "basis of order {k} needs length >= {}, got {length}",
                min_length(k)
            )));
        }

        let mut rows = Vec::with_capacity(length);
        let mut level_of_row = Vec::with_capacity(length);

        for v in poly_basis(length, (k + 1).min(length)) {
            rows.push(SparseRow { offset: 0, values: v });
            level_of_row.push(None);
        }

        let mut level = 0;
        let mut block = length;
        while block >= 2 {
            let template = detail_template(block, k);
            for b in 0..length / block {
                for v in &template {
                    rows.push(SparseRow {
                        offset: b * block,
                        values: v.clone(),
                    });
                    level_of_row.push(Some(level));
                }
            }
            block /= 2;
            level += 1;
        }
        debug_assert_eq!(rows.len(), length);

        let mut pyramid = Vec::new();
        let mut block = 2;
        while block <= length {
            let level = (length / block).ilog2() as usize;
            let first_row = level_of_row
                .iter()
                .position(|l| *l == Some(level))
                .unwrap_or(length);
            pyramid.push(TwoScale::new(block, k, first_row));
            block *= 2;
        }

        Ok(Self {
            length,
            k,
            coarse_count: coarse_count(k),
            rows,
            level_of_row,
            pyramid,
        })
    }

    /// Shared, immutable basis for `(length, k)`; built once per process.
    pub fn cached(length: usize, k: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<RwLock<HashMap<(usize, usize), Arc<DwtBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(b) = cache.read().expect("basis cache poisoned").get(&(length, k)) {
            return Ok(Arc::clone(b));
        }
        let built = Arc::new(Self::build(length, k)?);
        let mut w = cache.write().expect("basis cache poisoned");
        Ok(Arc::clone(w.entry((length, k)).or_insert(built)))
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coarse_count(&self) -> usize {
        self.coarse_count
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn level_of_row(&self) -> &[Option<usize>] {
        &self.level_of_row
    }

    /// Row `i` (0-based) as a dense vector.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.length];
        let r = &self.rows[i];
        out[r.support()].copy_from_slice(&r.values);
        out
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.length).map(|i| self.dense_row(i)).collect()
    }

    /// Deepest level that carries detail rows.
    pub fn finest_level(&self) -> Option<usize> {
        self.level_of_row.iter().flatten().copied().max()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.length {
            return Err(Error::dim(format!(
                "transform of length {} applied to {} values",
                self.length,
                x.len()
            )));
        }
        Ok(())
    }

    /// `W x`, computed level by level from the polynomial coefficients of dyadic
    /// blocks. Linear in the length.
    pub fn forward(&self, x: &[f64]) -> Result<CoefficientVector> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.length];
        let mut cur = x.to_vec();
        let mut next = Vec::with_capacity(self.length);
        for ts in &self.pyramid {
            let width = 2 * ts.fine;
            let details = ts.detail.len() / width;
            next.clear();
            for (m, input) in cur.chunks_exact(width).enumerate() {
                for row in ts.scaling.chunks_exact(width) {
                    next.push(dot(row, input));
                }
                let base = ts.first_row + m * details;
                for (i, row) in ts.detail.chunks_exact(width).enumerate() {
                    out[base + i] = dot(row, input);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out[..cur.len()].copy_from_slice(&cur);
        Ok(CoefficientVector {
            values: out,
            basis_length: self.length,
        })
    }

    /// `W x` as one inner product per stored row.
    pub fn forward_rows(&self, x: &[f64]) -> Result<CoefficientVector> {
        self.check_input(x)?;
        Ok(CoefficientVector {
            values: self.rows.iter().map(|r| r.dot(x)).collect(),
            basis_length: self.length,
        })
    }

    /// `W^T c`.
    pub fn inverse(&self, c: &CoefficientVector) -> Result<Vec<f64>> {
        if c.values.len() != self.length {
            return Err(Error::dim("coefficient vector does not match basis length"));
        }
        let mut out = vec![0.0; self.length];
        for (r, &ci) in self.rows.iter().zip(&c.values) {
            if ci == 0.0 {
                continue;
            }
            for (o, v) in out[r.support()].iter_mut().zip(&r.values) {
                *o += ci * v;
            }
        }
        Ok(out)
    }

    /// Dense dump, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.length {
            let row = self.dense_row(i);
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Wavelet coefficients in basis-row order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    values: Vec<f64>,
    basis_length: usize,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>, basis_length: usize) -> Result<Self> {
        if values.len() != basis_length {
            return Err(Error::dim("coefficient count must equal the basis length"));
        }
        Ok(Self {
            values,
            basis_length,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn basis_length(&self) -> usize {
        self.basis_length
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn soft_threshold(&self, lambda: f64) -> Result<Self> {
        Ok(Self {
            values: soft_threshold(&self.values, lambda)?,
            basis_length: self.basis_length,
        })
    }
}

/// Coordinatewise shrinkage towards zero by `lambda`.
pub fn soft_threshold(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::config(format!(
            "threshold must be nonnegative, got {lambda}"
        )));
    }
    Ok(x.iter().map(|&v| soft_threshold_scalar(v, lambda)).collect())
}

#[inline]
pub fn soft_threshold_scalar(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Splits `u` into its longest dyadic prefix and suffix. They coincide when
/// `u.len()` is a power of two.
pub fn pack(u: &[f64]) -> Result<(&[f64], &[f64])> {
    let len = u.len();
    if len < 2 {
        return Err(Error::dim(format!("pack needs at least 2 values, got {len}")));
    }
    let seg = 1usize << len.ilog2();
    Ok((&u[..seg], &u[len - seg..]))
}

/// Noise level from the median absolute finest-level detail coefficient,
/// computed on the longest dyadic prefix of `y`.
pub fn estimate_sigma_mad(y: &[f64], k: usize) -> Result<f64> {
    if y.len() < min_length(k) {
        return Err(Error::dim(format!(
            "MAD estimate of order {k} needs at least {} values, got {}",
            min_length(k),
            y.len()
        )));
    }
    let len = 1usize << y.len().ilog2();
    let basis = DwtBasis::cached(len, k)?;
    let finest = basis
        .finest_level()
        .ok_or_else(|| Error::dim("basis has no detail rows"))?;
    let mut fine: Vec<f64> = basis
        .rows()
        .iter()
        .zip(basis.level_of_row())
        .filter(|(_, l)| **l == Some(finest))
        .map(|(r, _)| r.dot(&y[..len]).abs())
        .collect();
    Ok(median_in_place(&mut fine) / 0.6745)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `v` along the orthonormal vectors `q`, twice.
fn orthogonalize(v: &mut [f64], q: &[Vec<f64>]) {
    for _ in 0..2 {
        for qi in q {
            let c = dot(v, qi);
            v.iter_mut().zip(qi).for_each(|(a, b)| *a -= c * b);
        }
    }
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Centered monomial of degree `deg` on `len` points, values in `[-1, 1]`.
fn centered_monomial(len: usize, deg: usize) -> Vec<f64> {
    let half = (len as f64 - 1.0) / 2.0;
    (0..len)
        .map(|i| {
            let u = if half > 0.0 { (i as f64 - half) / half } else { 0.0 };
            u.powi(deg as i32)
        })
        .collect()
}

/// Orthonormal basis of discrete polynomials of degree `< dims` on `len` points.
fn poly_basis(len: usize, dims: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(dims);
    for deg in 0..dims {
        let mut v = centered_monomial(len, deg);
        orthogonalize(&mut v, &q);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        fix_sign(&mut v);
        q.push(v);
    }
    q
}

/// Detail vectors on one block of `block` points: piecewise polynomials on the two
/// halves, orthogonal to polynomials on the whole block.
fn detail_template(block: usize, k: usize) -> Vec<Vec<f64>> {
    let half = block / 2;
    let fine_dims = half.min(k + 1);
    let coarse_dims = block.min(k + 1);
    let want = 2 * fine_dims - coarse_dims;
    if want == 0 {
        return Vec::new();
    }

    let mut q = poly_basis(block, coarse_dims);
    let mut out = Vec::with_capacity(want);
    let local = poly_basis(half, fine_dims);
    'outer: for p in &local {
        for side in 0..2 {
            let mut v = vec![0.0; block];
            v[side * half..(side + 1) * half].copy_from_slice(p);
            orthogonalize(&mut v, &q);
            let nv = norm(&v);
            if nv < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            fix_sign(&mut v);
            q.push(v.clone());
            out.push(v);
            if out.len() == want {
                break 'outer;
            }
        }
    }
    debug_assert_eq!(out.len(), want);
    out
}
