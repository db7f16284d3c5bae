use adavaw_core::wavelet::{min_length, pack, soft_threshold, DwtBasis};
use proptest::prelude::*;

fn lengths(k: usize) -> impl Iterator<Item = usize> {
    (3..=10).map(|e| 1usize << e).filter(move |&l| l >= min_length(k))
}

/// `max |W W^T - I|`, one column at a time through the fast transform.
fn gram_error(b: &DwtBasis) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..b.length() {
        let col = b.forward(&b.dense_row(i)).unwrap();
        for (j, v) in col.values().iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

#[test]
fn orthonormal_for_all_sizes() {
    for k in 0..=3 {
        for len in lengths(k) {
            let b = DwtBasis::build(len, k).unwrap();
            let e = gram_error(&b);
            assert!(e < 1e-9, "length {len}, k {k}: {e:e}");
        }
    }
}

#[test]
fn detail_rows_annihilate_monomials() {
    for k in 0..=3 {
        for len in lengths(k) {
            let b = DwtBasis::build(len, k).unwrap();
            for deg in 0..=k {
                let mono: Vec<f64> = (1..=len).map(|i| (i as f64).powi(deg as i32)).collect();
                let mono_norm = mono.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (i, lvl) in b.level_of_row().iter().enumerate() {
                    if lvl.is_none() {
                        continue;
                    }
                    let row = b.dense_row(i);
                    let ip: f64 = row.iter().zip(&mono).map(|(a, c)| a * c).sum();
                    let rel = ip.abs() / mono_norm;
                    assert!(rel < 1e-8, "length {len}, k {k}, row {i}, degree {deg}: {rel:e}");
                }
            }
        }
    }
}

#[test]
fn detail_support_shrinks_with_level() {
    for k in 0..=3 {
        for len in lengths(k) {
            let b = DwtBasis::build(len, k).unwrap();
            for (row, lvl) in b.rows().iter().zip(b.level_of_row()) {
                if let Some(j) = lvl {
                    assert!(row.support().len() <= len >> j);
                }
            }
        }
    }
}

#[test]
fn piecewise_polynomials_are_sparse() {
    // Each knot touches at most (k + 1) detail rows per level.
    for k in 0..=3 {
        let len = 1024;
        let b = DwtBasis::cached(len, k).unwrap();
        let knots = [137usize, 500, 801];
        let x: Vec<f64> = (0..len)
            .map(|i| {
                let piece = knots.iter().filter(|&&p| i >= p).count() as f64;
                let u = i as f64 / len as f64;
                (0..=k).map(|d| (piece + 1.0 + d as f64) * u.powi(d as i32)).sum()
            })
            .collect();
        let c = b.forward(&x).unwrap();
        let nonzero = c
            .values()
            .iter()
            .zip(b.level_of_row())
            .filter(|(v, l)| l.is_some() && v.abs() > 1e-8)
            .count();
        let bound = (k + 1) * (k + 1 + knots.len() * len.ilog2() as usize);
        assert!(nonzero <= bound, "k {k}: {nonzero} > {bound}");
    }
}

#[test]
fn mad_recovers_unit_noise() {
    use adavaw_core::generators::{noise, NoiseKind};
    use adavaw_core::wavelet::estimate_sigma_mad;
    let hits = (0..20)
        .filter(|&s| {
            let e = noise(4096, 1.0, NoiseKind::Gaussian, s).unwrap();
            (0.9..=1.1).contains(&estimate_sigma_mad(&e, 0).unwrap())
        })
        .count();
    assert!(hits >= 18, "{hits}");
}

#[test]
fn mad_ignores_a_spike() {
    use adavaw_core::generators::{noise, NoiseKind};
    use adavaw_core::wavelet::estimate_sigma_mad;
    let base: Vec<f64> = noise(512, 0.1, NoiseKind::Gaussian, 4)
        .unwrap()
        .iter()
        .map(|e| 3.0 + e)
        .collect();
    let mut spiked = base.clone();
    spiked[200] += 50.0;
    let a = estimate_sigma_mad(&base, 1).unwrap();
    let b = estimate_sigma_mad(&spiked, 1).unwrap();
    assert!(b <= 2.0 * a, "{a} {b}");
}

proptest! {
    #[test]
    fn parseval(x in prop::collection::vec(-10.0f64..10.0, 64), k in 0usize..4) {
        let b = DwtBasis::cached(64, k).unwrap();
        let c = b.forward(&x).unwrap();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((c.l2_norm() - nx).abs() <= 1e-9 * nx.max(1e-300));
    }

    #[test]
    fn soft_threshold_shrinks(x in prop::collection::vec(-10.0f64..10.0, 1..50), lambda in 0.0f64..5.0) {
        let t = soft_threshold(&x, lambda).unwrap();
        for (a, b) in t.iter().zip(&x) {
            prop_assert!(a.abs() <= b.abs());
            prop_assert!((a - b).abs() <= lambda + 1e-12);
        }
    }

    #[test]
    fn pack_covers(len in 2usize..3000) {
        let u: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let (a, b) = pack(&u).unwrap();
        prop_assert_eq!(a.len(), b.len());
        prop_assert!(a.len().is_power_of_two() && 2 * a.len() > len);
        prop_assert_eq!(a[0], 0.0);
        prop_assert_eq!(*b.last().unwrap(), (len - 1) as f64);
    }
}
