//! Synthetic ground truth for each sequence class, and observation noise.
//!
//! Every generated sequence is re-checked against its declared class with
//! [`variational_profile`] before it is returned.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{jump_tolerance, variational_profile, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    /// Bound `B` on `|theta_t|`.
    pub bound: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

fn default_true() -> bool {
    true
}

fn default_tv() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Degree-`k` pieces between `knots` random knots. Continuous pieces are
    /// `C^{k-1}` splines; otherwise each piece is an independent polynomial.
    /// Coefficients are drawn from `[-coeff_range, coeff_range]` on the `[0, 1]` time scale.
    PiecewisePoly {
        k: usize,
        knots: usize,
        coeff_range: f64,
        #[serde(default = "default_true")]
        continuous: bool,
    },
    /// Samples `f(i / n)` of a continuous piecewise polynomial on `segments` random pieces.
    /// For `k >= 1` it is a degree-`k` spline whose `k`-th derivative jumps by `tv` in total.
    /// For `k = 0` it is piecewise linear with `integral |f'| = tv`, since a continuous
    /// piecewise constant function is constant. The shape depends on the seed only, so
    /// `tv_k` converges to `tv` as `n` grows.
    SampledContinuous {
        k: usize,
        segments: usize,
        #[serde(default = "default_tv")]
        tv: f64,
    },
    /// Random `D^{k+1} theta` with `n^k ||.||_2 = radius`, integrated from zero.
    Sobolev { k: usize, radius: f64 },
    /// Random `D^{k+1} theta` with `n^k ||.||_inf = radius`, integrated from zero.
    Holder { k: usize, radius: f64 },
    /// Discrete spline with exactly `jumps` nonzero entries in `D^{k+1} theta`, scaled
    /// so that `max |theta_t| = B`. Knot positions are fractions of the horizon, so the
    /// shape is stable in `n`.
    ExactSparse { k: usize, jumps: usize },
    /// Random walk on `{-B, 0, B}` that never stays put for `steps` rounds, then freezes.
    Alternating { steps: usize },
    Constant { value: f64 },
}

impl GeneratorKind {
    /// TV order the class is defined for; 0 for the order-free kinds.
    pub fn order(&self) -> usize {
        match *self {
            GeneratorKind::PiecewisePoly { k, .. }
            | GeneratorKind::SampledContinuous { k, .. }
            | GeneratorKind::Sobolev { k, .. }
            | GeneratorKind::Holder { k, .. }
            | GeneratorKind::ExactSparse { k, .. } => k,
            GeneratorKind::Alternating { .. } | GeneratorKind::Constant { .. } => 0,
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<TimeSeries> {
    let n = spec.n;
    let k = spec.kind.order();
    if n < k + 2 {
        return Err(Error::Generation(format!(
            "horizon {n} too short for order {k}; need n >= {}",
            k + 2
        )));
    }
    if !(spec.bound > 0.0 && spec.bound.is_finite()) {
        return Err(Error::Generation(format!("bound must be positive, got {}", spec.bound)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = match spec.kind {
        GeneratorKind::PiecewisePoly { k, knots, coeff_range, continuous } => {
            piecewise_poly(&mut rng, n, k, knots, coeff_range, continuous, spec.bound)?
        }
        GeneratorKind::SampledContinuous { k, segments, tv } => {
            sampled_continuous(&mut rng, n, k, segments, tv)?
        }
        GeneratorKind::Sobolev { k, radius } => {
            check_radius(radius)?;
            let d: Vec<f64> = (0..n - k - 1).map(|_| rng.sample(StandardNormal)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = radius / (nk(n, k) * norm);
            integrate(&d.iter().map(|v| v * s).collect::<Vec<_>>(), k + 1)
        }
        GeneratorKind::Holder { k, radius } => {
            check_radius(radius)?;
            let d: Vec<f64> = (0..n - k - 1).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = radius / (nk(n, k) * norm);
            integrate(&d.iter().map(|v| v * s).collect::<Vec<_>>(), k + 1)
        }
        GeneratorKind::ExactSparse { k, jumps } => exact_sparse(&mut rng, n, k, jumps, spec.bound)?,
        GeneratorKind::Alternating { steps } => alternating(&mut rng, n, steps, spec.bound),
        GeneratorKind::Constant { value } => vec![value; n],
    };
    verify(spec, &theta)?;
    TimeSeries::from_theta(theta)
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::Generation(format!("radius must be positive, got {radius}")))
    }
}

fn nk(n: usize, k: usize) -> f64 {
    (n as f64).powi(k as i32)
}

/// `order` cumulative sums, each starting from 0. The result has `order` more entries
/// than `d`, its first `order` entries are 0 and `D^order` of it is `d`.
fn integrate(d: &[f64], order: usize) -> Vec<f64> {
    let mut cur = d.to_vec();
    for _ in 0..order {
        let mut next = Vec::with_capacity(cur.len() + 1);
        let mut acc = 0.0;
        next.push(0.0);
        for v in &cur {
            acc += v;
            next.push(acc);
        }
        cur = next;
    }
    cur
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Shrinks `x` so that `sup |x| <= bound`. Scaling keeps the piece structure intact.
fn fit_bound(x: &mut [f64], bound: f64) {
    let s = sup(x);
    if s > bound {
        let f = bound / s;
        x.iter_mut().for_each(|v| *v *= f);
    }
}

fn center_midrange(x: &mut [f64]) {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    x.iter_mut().for_each(|v| *v -= mid);
}

fn piecewise_poly(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    knots: usize,
    coeff_range: f64,
    continuous: bool,
    bound: f64,
) -> Result<Vec<f64>> {
    if !(coeff_range > 0.0 && coeff_range.is_finite()) {
        return Err(Error::Generation(format!(
            "coeff_range must be positive, got {coeff_range}"
        )));
    }
    if knots >= n {
        return Err(Error::Generation(format!("{knots} knots do not fit in {n} points")));
    }
    let mut pos: Vec<usize> = sample(rng, n - 1, knots).into_iter().map(|i| i + 1).collect();
    pos.sort_unstable();
    let coeffs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..=k).map(|_| rng.random_range(-coeff_range..=coeff_range)).collect()
    };
    let x = |i: usize| i as f64 / n as f64;
    let eval = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);

    let mut theta = vec![0.0; n];
    if continuous {
        let base = coeffs(rng);
        let kicks: Vec<f64> = pos
            .iter()
            .map(|_| {
                let mut v = 0.0;
                while v == 0.0 {
                    v = rng.random_range(-coeff_range..=coeff_range);
                }
                v
            })
            .collect();
        for (i, th) in theta.iter_mut().enumerate() {
            let xi = x(i);
            *th = eval(&base, xi);
            for (&p, &c) in pos.iter().zip(&kicks) {
                if i >= p {
                    // (x - tau)_+^k, with a unit step for k = 0
                    *th += c * (xi - x(p)).powi(k as i32);
                }
            }
        }
    } else {
        let mut starts = vec![0];
        starts.extend(&pos);
        starts.push(n);
        for w in starts.windows(2) {
            let c = coeffs(rng);
            for i in w[0]..w[1] {
                theta[i] = eval(&c, x(i));
            }
        }
    }
    fit_bound(&mut theta, bound);
    Ok(theta)
}

fn sampled_continuous(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    segments: usize,
    tv: f64,
) -> Result<Vec<f64>> {
    let min_segments = if k == 0 { 1 } else { 2 };
    if segments < min_segments {
        return Err(Error::Generation(format!(
            "sampled_continuous of order {k} needs at least {min_segments} segments"
        )));
    }
    if !(tv > 0.0 && tv.is_finite()) {
        return Err(Error::Generation(format!("tv must be positive, got {tv}")));
    }
    let mut breaks: Vec<f64> = (0..segments - 1).map(|_| rng.random_range(0.0..1.0)).collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    let mut draw = || {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * rng.random_range(0.5..1.5)
    };
    let widths: Vec<f64> = breaks.windows(2).map(|b| b[1] - b[0]).collect();
    // `levels` are the values of f' (k = 0) or f^{(k)} (k >= 1) on each piece.
    let levels: Vec<f64> = if k == 0 {
        let raw: Vec<f64> = (0..segments).map(|_| draw()).collect();
        let l1: f64 = raw.iter().zip(&widths).map(|(v, w)| v.abs() * w).sum();
        raw.iter().map(|v| v * tv / l1).collect()
    } else {
        let jumps: Vec<f64> = (1..segments).map(|_| draw()).collect();
        let total: f64 = jumps.iter().map(|j| j.abs()).sum();
        let mut raw = vec![0.0];
        for j in &jumps {
            raw.push(raw.last().unwrap() + j * tv / total);
        }
        // a mean-zero k-th derivative keeps the lower-order trend small
        let mean: f64 = raw.iter().zip(&widths).map(|(v, w)| v * w).sum();
        raw.iter().map(|v| v - mean).collect()
    };

    // f(x) = sum_j v_j ((x - b_j)_+^m - (x - b_{j+1})_+^m) / m!
    let m = k.max(1);
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let ramp = |x: f64, b: f64| if x > b { (x - b).powi(m as i32) } else { 0.0 };
    let mut theta: Vec<f64> = (1..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            levels
                .iter()
                .zip(breaks.windows(2))
                .map(|(v, b)| v * (ramp(x, b[0]) - ramp(x, b[1])))
                .sum::<f64>()
                / fact
        })
        .collect();
    center_midrange(&mut theta);
    Ok(theta)
}

fn exact_sparse(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    jumps: usize,
    bound: f64,
) -> Result<Vec<f64>> {
    let len = n - k - 1;
    if jumps > len {
        return Err(Error::Generation(format!(
            "{jumps} jumps do not fit in {len} entries of D^{} theta",
            k + 1
        )));
    }
    let fracs: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.05..0.95)).collect();
    let sizes: Vec<f64> = (0..jumps)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.random_range(0.5..1.5)
        })
        .collect();
    let mut d = vec![0.0; len];
    let mut taken = vec![false; len];
    for (f, s) in fracs.iter().zip(&sizes) {
        let mut p = ((f * len as f64) as usize).min(len - 1);
        // collisions only happen on short horizons; walk to the next free slot
        while taken[p] {
            p = (p + 1) % len;
        }
        taken[p] = true;
        d[p] = s / nk(n, k);
    }
    let mut theta = integrate(&d, k + 1);
    center_midrange(&mut theta);
    // the jump sizes fix the shape only; every series spans the full range [-B, B]
    let s = sup(&theta);
    if s > 0.0 {
        theta.iter_mut().for_each(|v| *v *= bound / s);
    }
    Ok(theta)
}

fn alternating(rng: &mut ChaCha8Rng, n: usize, steps: usize, bound: f64) -> Vec<f64> {
    let states = [-bound, 0.0, bound];
    let mut cur = 1usize;
    let mut theta = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 && t < steps {
            cur = (cur + rng.random_range(1..=2)) % 3;
        }
        theta.push(states[cur]);
    }
    theta
}

fn verify(spec: &GeneratorSpec, theta: &[f64]) -> Result<()> {
    let n = spec.n;
    if theta.len() != n || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Generation("generated sequence is not finite".into()));
    }
    let s = sup(theta);
    let slack = 1e-12 * spec.bound;
    if s > spec.bound + slack {
        return Err(Error::Generation(format!(
            "sup |theta| = {s:.6e} exceeds bound {}; lower the radius/tv or raise the bound",
            spec.bound
        )));
    }
    let fail = |what: String| Err(Error::Generation(format!("class check failed: {what}")));
    match spec.kind {
        GeneratorKind::PiecewisePoly { k, knots, .. } => {
            let p = variational_profile(theta, k)?;
            if p.jumps > knots * (k + 1) {
                return fail(format!("{} jumps for {knots} knots of degree {k}", p.jumps));
            }
        }
        GeneratorKind::SampledContinuous { k, tv, .. } => {
            let p = variational_profile(theta, k)?;
            // sampled TV approaches tv from below, discretisation can add O(1/n)
            if p.tv_k > tv * (1.0 + 4.0 * (k + 1) as f64 / n as f64) + 1e-9 {
                return fail(format!("tv_{k} = {} exceeds {tv}", p.tv_k));
            }
        }
        GeneratorKind::Sobolev { k, radius } => {
            let p = variational_profile(theta, k)?;
            if (p.sobolev - radius).abs() > 1e-6 * radius {
                return fail(format!("Sobolev norm {} != radius {radius}", p.sobolev));
            }
            if theta[..=k].iter().any(|&v| v != 0.0) {
                return fail("initial values are not zero".into());
            }
        }
        GeneratorKind::Holder { k, radius } => {
            let p = variational_profile(theta, k)?;
            if (p.holder - radius).abs() > 1e-6 * radius {
                return fail(format!("Holder norm {} != radius {radius}", p.holder));
            }
            if theta[..=k].iter().any(|&v| v != 0.0) {
                return fail("initial values are not zero".into());
            }
        }
        GeneratorKind::ExactSparse { k, jumps } => {
            let p = variational_profile(theta, k)?;
            if p.jumps != jumps {
                return fail(format!(
                    "{} nonzero entries of D^{} theta, wanted {jumps}; at n = {n} the jumps may be \
                     below the detection tolerance {:.1e}",
                    p.jumps,
                    k + 1,
                    jump_tolerance(theta)
                ));
            }
        }
        GeneratorKind::Alternating { steps } => {
            let b = spec.bound;
            if theta.iter().any(|&v| v != b && v != -b && v != 0.0) {
                return fail("value outside {-B, 0, B}".into());
            }
            let m = steps.min(n);
            if m > 0 && theta[..m].windows(2).any(|w| w[0] == w[1]) {
                return fail("repeated value before the freeze".into());
            }
            if m > 0 && theta[m - 1..].iter().any(|&v| v != theta[m - 1]) {
                return fail("sequence moves after the freeze".into());
            }
        }
        GeneratorKind::Constant { value } => {
            if theta.iter().any(|&v| v != value) {
                return fail("constant sequence varies".into());
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-sigma sqrt 3, sigma sqrt 3]`, variance `sigma^2`.
    UniformBounded,
}

/// Returns `ts` with `y = theta + eps`, `eps` iid with variance `sigma^2`.
pub fn add_noise(ts: &TimeSeries, sigma: f64, kind: NoiseKind, seed: u64) -> Result<TimeSeries> {
    let theta = ts
        .theta()
        .ok_or_else(|| Error::Generation("add_noise needs ground truth".into()))?;
    let eps = noise(theta.len(), sigma, kind, seed)?;
    let y = theta.iter().zip(&eps).map(|(t, e)| t + e).collect();
    ts.clone().with_observations(y)
}

/// `n` iid noise draws.
pub fn noise(n: usize, sigma: f64, kind: NoiseKind, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        NoiseKind::Gaussian => {
            let d = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        NoiseKind::UniformBounded => {
            let a = sigma * 3f64.sqrt();
            (0..n).map(|_| rng.random_range(-a..=a)).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::tv_k;

    fn spec(n: usize, kind: GeneratorKind) -> GeneratorSpec {
        GeneratorSpec { n, bound: 1.0, seed: 11, kind }
    }

    #[test]
    fn constant_has_no_variation() {
        let ts = generate(&spec(100, GeneratorKind::Constant { value: 1.0 })).unwrap();
        for k in 0..4 {
            let p = variational_profile(ts.theta().unwrap(), k).unwrap();
            assert_eq!(p.tv_k, 0.0);
            assert_eq!(p.jumps, 0);
        }
        assert!(generate(&spec(100, GeneratorKind::Constant { value: 2.0 })).is_err());
    }

    #[test]
    fn exact_sparse_counts() {
        let ts = generate(&spec(1024, GeneratorKind::ExactSparse { k: 1, jumps: 3 })).unwrap();
        assert_eq!(variational_profile(ts.theta().unwrap(), 1).unwrap().jumps, 3);
        for k in 0..=2 {
            for j in [1, 4, 7] {
                let s = GeneratorSpec { seed: j as u64, ..spec(2048, GeneratorKind::ExactSparse { k, jumps: j }) };
                let ts = generate(&s).unwrap();
                assert_eq!(variational_profile(ts.theta().unwrap(), k).unwrap().jumps, j);
                assert!((sup(ts.theta().unwrap()) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_continuous_tv_converges() {
        for k in 0..=1 {
            let tvs: Vec<f64> = (8..=14)
                .map(|e| {
                    let ts = generate(&spec(1 << e, GeneratorKind::SampledContinuous { k, segments: 6, tv: 1.0 }))
                        .unwrap();
                    tv_k(ts.theta().unwrap(), k).unwrap()
                })
                .collect();
            for w in tvs.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{tvs:?}");
            }
            let top = &tvs[tvs.len() - 2..];
            assert!((top[1] - top[0]).abs() / top[1] < 0.05);
            assert!((tvs.last().unwrap() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn sobolev_and_holder_start_at_zero() {
        for k in 0..=2 {
            let s = GeneratorSpec { bound: 1e3, ..spec(512, GeneratorKind::Sobolev { k, radius: 0.5 }) };
            let ts = generate(&s).unwrap();
            let th = ts.theta().unwrap();
            assert!(th[..=k].iter().all(|&v| v == 0.0));
            let s = GeneratorSpec { bound: 1e3, ..spec(512, GeneratorKind::Holder { k, radius: 0.5 }) };
            let ts = generate(&s).unwrap();
            let p = variational_profile(ts.theta().unwrap(), k).unwrap();
            assert!((p.holder - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_radius_reports() {
        let e = generate(&spec(4096, GeneratorKind::Holder { k: 0, radius: 1e4 })).unwrap_err();
        assert!(matches!(e, Error::Generation(ref m) if m.contains("exceeds bound")));
    }

    #[test]
    fn alternating_chain() {
        let s = GeneratorSpec { n: 300, bound: 2.0, seed: 5, kind: GeneratorKind::Alternating { steps: 100 } };
        let th = generate(&s).unwrap().theta().unwrap().to_vec();
        assert!(th.iter().all(|&v| v == 2.0 || v == -2.0 || v == 0.0));
        assert!(th[..100].windows(2).all(|w| w[0] != w[1]));
        assert!(th[99..].iter().all(|&v| v == th[99]));
    }

    #[test]
    fn piecewise_poly_bounded() {
        for continuous in [true, false] {
            for k in 0..=3 {
                let s = GeneratorSpec {
                    n: 500,
                    bound: 1.0,
                    seed: k as u64,
                    kind: GeneratorKind::PiecewisePoly { k, knots: 5, coeff_range: 3.0, continuous },
                };
                let th = generate(&s).unwrap().theta().unwrap().to_vec();
                assert!(sup(&th) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn short_horizon_rejected() {
        assert!(generate(&spec(3, GeneratorKind::ExactSparse { k: 2, jumps: 1 })).is_err());
    }

    #[test]
    fn noise_properties() {
        let ts = generate(&spec(100_000, GeneratorKind::Constant { value: 0.5 })).unwrap();
        let clean = add_noise(&ts, 0.0, NoiseKind::Gaussian, 1).unwrap();
        assert_eq!(clean.y().unwrap(), ts.theta().unwrap());

        let noisy = add_noise(&ts, 1.0, NoiseKind::Gaussian, 9).unwrap();
        let again = add_noise(&ts, 1.0, NoiseKind::Gaussian, 9).unwrap();
        assert_eq!(noisy.y(), again.y());
        let e: Vec<f64> = noisy.y().unwrap().iter().map(|y| y - 0.5).collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64;
        assert!((0.98..=1.02).contains(&var), "{var}");

        let u = noise(100_000, 0.5, NoiseKind::UniformBounded, 2).unwrap();
        let a = 0.5 * 3f64.sqrt();
        assert!(u.iter().all(|v| v.abs() <= a));
        let var = u.iter().map(|v| v * v).sum::<f64>() / u.len() as f64;
        assert!((var - 0.25).abs() < 0.01);

        assert!(add_noise(&ts, -1.0, NoiseKind::Gaussian, 0).is_err());
    }
}
