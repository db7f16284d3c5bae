use adavaw_core::generators::{generate, noise, GeneratorKind, GeneratorSpec, NoiseKind};
use adavaw_core::policy::{
    meta_ewa, packed_energy, run_multidim, run_policy, AdaVaw, AdaVawConfig, Ewa,
};
use adavaw_core::seq::diff_op;
use adavaw_core::wavelet::min_length;
use adavaw_core::Error;
use proptest::prelude::*;

fn noisy(theta: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let e = noise(theta.len(), sigma, NoiseKind::Gaussian, seed).unwrap();
    theta.iter().zip(&e).map(|(a, b)| a + b).collect()
}

fn piecewise(n: usize, k: usize, seed: u64) -> Vec<f64> {
    let spec = GeneratorSpec {
        n,
        bound: 1.0,
        seed,
        kind: GeneratorKind::PiecewisePoly { k, knots: 3, coeff_range: 1.0, continuous: false },
    };
    generate(&spec).unwrap().theta().unwrap().to_vec()
}

#[test]
fn predictions_only_depend_on_the_past() {
    let n = 600;
    for k in 0..=3 {
        let theta = piecewise(n, k, 3);
        let a = noisy(&theta, 0.2, 1);
        let mut b = a.clone();
        let cut = 350;
        for (i, v) in b[cut..].iter_mut().enumerate() {
            *v = -3.0 + (i % 7) as f64;
        }
        let cfg = AdaVawConfig::new(k, n, 0.2, 1.0);
        let ra = run_policy(&cfg, &a, None).unwrap();
        let rb = run_policy(&cfg, &b, None).unwrap();
        // the prediction at cut + 1 is the last one that sees only the shared prefix
        for t in 0..=cut {
            assert_eq!(ra.trace[t].prediction, rb.trace[t].prediction, "k={k} t={}", t + 1);
        }
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let n = 800;
    let theta = piecewise(n, 1, 9);
    let y = noisy(&theta, 0.1, 2);
    let cfg = AdaVawConfig::new(1, n, 0.1, 1.0).with_seed(4);
    let a = run_policy(&cfg, &y, Some(&theta)).unwrap();
    let b = run_policy(&cfg, &y, Some(&theta)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.bins, b.bins);
    assert_eq!(a.report.regret.to_bits(), b.report.regret.to_bits());
}

#[test]
fn bins_partition_the_horizon() {
    for k in 0..=3 {
        for seed in 0..5 {
            let n = 700;
            let theta = piecewise(n, k, seed);
            let y = noisy(&theta, 0.05, seed + 100);
            let run = run_policy(&AdaVawConfig::new(k, n, 0.05, 1.0), &y, Some(&theta)).unwrap();
            let bins = &run.bins;
            assert_eq!(bins[0].start, k.max(1));
            assert_eq!(bins.last().unwrap().end, n);
            for w in bins.windows(2) {
                assert!(w[0].start <= w[0].end);
                assert_eq!(w[1].start, w[0].end + 1);
            }
            for w in run.trace.windows(2) {
                let step = if w[0].restarted { 1 } else { 0 };
                assert_eq!(w[1].bin_id, w[0].bin_id + step);
            }
            assert_eq!(run.report.num_bins, bins.len());
        }
    }
}

#[test]
fn restarts_follow_the_statistic() {
    let n = 500;
    let theta = piecewise(n, 2, 1);
    let y = noisy(&theta, 0.05, 7);
    let run = run_policy(&AdaVawConfig::new(2, n, 0.05, 1.0), &y, Some(&theta)).unwrap();
    for s in &run.trace {
        assert_eq!(s.restarted, s.statistic > 0.05);
    }
}

#[test]
fn protocol_violations_always_error() {
    let cfg = AdaVawConfig::new(2, 5, 0.1, 1.0);
    let mut p = AdaVaw::new(&cfg).unwrap();
    for _ in 0..5 {
        assert!(matches!(p.observe(0.0), Err(Error::Protocol(_))));
        p.predict().unwrap();
        assert!(matches!(p.predict(), Err(Error::Protocol(_))));
        p.observe(0.3).unwrap();
    }
    assert!(matches!(p.predict(), Err(Error::HorizonExhausted { .. })));
}

#[test]
fn flat_truth_rarely_restarts() {
    let n = 1024;
    let quiet = (0..20)
        .filter(|&s| {
            let y = noise(n, 0.1, NoiseKind::Gaussian, s).unwrap();
            run_policy(&AdaVawConfig::new(0, n, 0.1, 10.0), &y, Some(&vec![0.0; n]))
                .unwrap()
                .bins
                .len()
                == 1
        })
        .count();
    assert!(quiet >= 16, "{quiet}");
}

#[test]
fn large_jump_is_detected_quickly() {
    let n = 1024;
    let theta: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 10.0 }).collect();
    let hits = (0..20)
        .filter(|&s| {
            let y = noisy(&theta, 0.1, s);
            let run = run_policy(&AdaVawConfig::new(0, n, 0.1, 10.0), &y, Some(&theta)).unwrap();
            run.trace
                .iter()
                .any(|st| st.restarted && st.t > n / 2 && st.t <= n / 2 + 64)
        })
        .count();
    assert!(hits >= 16, "{hits}");
}

#[test]
fn short_windows_emit_predictions() {
    // k = 3 needs a window of 8; the first steps of every bin skip the check
    let n = 64;
    let theta: Vec<f64> = (0..n).map(|i| if i % 9 < 4 { 1.0 } else { -1.0 }).collect();
    let run = run_policy(&AdaVawConfig::new(3, n, 0.01, 1.0), &theta, Some(&theta)).unwrap();
    assert_eq!(run.trace.len(), n);
    for s in &run.trace {
        assert!(s.prediction.is_finite());
    }
    let restarts: Vec<usize> = run.trace.iter().filter(|s| s.restarted).map(|s| s.t).collect();
    for w in restarts.windows(2) {
        assert!(w[1] - w[0] >= min_length(3) - 3);
    }
}

#[test]
fn noiseless_polynomial_regret_is_small() {
    // theta = y, k matching the degree: only the VAW learning cost remains
    for k in 0..=2 {
        let n = 2048;
        let theta: Vec<f64> = (1..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                0.3 + (0..=k).map(|p| 0.2 * x.powi(p as i32)).sum::<f64>() * 0.5
            })
            .collect();
        let run = run_policy(&AdaVawConfig::new(k, n, 0.1, 1.0), &theta, Some(&theta)).unwrap();
        let b = 1.0f64;
        let d = (k + 1) as f64;
        let bound = d * b * b / 2.0 * (1.0 + (n as f64).powi(k as i32 + 2) / d).ln() + 1.0;
        assert_eq!(run.bins.len(), 1);
        assert!(run.report.regret < bound, "k={k}: {} vs {bound}", run.report.regret);
    }
}

#[test]
fn energy_lower_bounds_tv_on_noiseless_windows() {
    // (||W a|| + ||W b||) / sqrt(L) <= c(k) L^k ||D^{k+1} theta||_1 with c(k) calibrated
    // on one set of piecewise polynomials and checked on a fresh one.
    let ratio = |k: usize, seed: u64| -> Option<f64> {
        let len = 40 + (seed as usize * 37) % 400;
        let th = piecewise(len, k, seed);
        let d: f64 = diff_op(&th, k + 1).unwrap().iter().map(|v| v.abs()).sum();
        if d < 1e-9 {
            return None;
        }
        let e = packed_energy(&th, k, 0.0).unwrap() / (len as f64).sqrt();
        Some(e / ((len as f64).powi(k as i32) * d))
    };
    for k in 0..=3 {
        let calib = (0..100).filter_map(|s| ratio(k, s)).fold(0.0f64, f64::max);
        let c = 2.0 * calib;
        for s in 1000..1100 {
            if let Some(r) = ratio(k, s) {
                assert!(r <= c, "k={k} seed={s}: {r} > {c}");
            }
        }
    }
}

#[test]
fn meta_weights_find_the_perfect_expert() {
    let n = 1 << 12;
    let theta: Vec<f64> = (0..n).map(|i| (i as f64 / 300.0).sin() * 0.5).collect();
    let y = noisy(&theta, 0.1, 5);
    let mut ewa = Ewa::new(4, Ewa::meta_rate(1.0, n)).unwrap();
    for (t, &yt) in y.iter().enumerate() {
        let p = [theta[t], theta[t] + 1.0, theta[t] - 1.0, -theta[t] + 1.0];
        ewa.predict(&p).unwrap();
        ewa.update(&p, yt).unwrap();
    }
    assert!(ewa.weights()[0] >= 0.99, "{:?}", ewa.weights());
}

#[test]
fn meta_regret_within_log4_over_eta() {
    for scenario in 0..10u64 {
        let k_truth = (scenario % 3) as usize;
        let n = 1024;
        let spec = GeneratorSpec {
            n,
            bound: 1.0,
            seed: scenario,
            kind: GeneratorKind::PiecewisePoly { k: k_truth, knots: 2, coeff_range: 1.0, continuous: true },
        };
        let theta = generate(&spec).unwrap().theta().unwrap().to_vec();
        let y = noisy(&theta, 0.2, scenario + 50);
        let cfgs: Vec<AdaVawConfig> = (0..=3).map(|k| AdaVawConfig::new(k, n, 0.2, 1.0)).collect();
        let m = meta_ewa(&cfgs, &y, Some(&theta), 1.0, n).unwrap();
        let best = m.instances.iter().map(|r| r.regret).fold(f64::INFINITY, f64::min);
        assert!(m.report.regret <= best + 4f64.ln() / m.eta, "scenario {scenario}");
    }
}

#[test]
fn meta_with_identical_instances_is_transparent() {
    let n = 300;
    let theta = piecewise(n, 1, 2);
    let y = noisy(&theta, 0.1, 3);
    let cfg = AdaVawConfig::new(1, n, 0.1, 1.0);
    let single = run_policy(&cfg, &y, Some(&theta)).unwrap();
    let m = meta_ewa(&[cfg.clone(), cfg.clone(), cfg], &y, Some(&theta), 1.0, n).unwrap();
    for (a, b) in m.predictions.iter().zip(single.predictions()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert!(m.final_weights.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn multidim_sums_coordinates() {
    let n = 512;
    let theta = piecewise(n, 1, 4);
    let y = noisy(&theta, 0.1, 8);
    let cfg = AdaVawConfig::new(1, n, 0.1, 1.0);
    let single = run_policy(&cfg, &y, Some(&theta)).unwrap().report.regret;

    let one = run_multidim(&cfg, &[y.clone()], Some(&[theta.clone()])).unwrap();
    assert_eq!(one.total.regret, single);

    let three = run_multidim(&cfg, &vec![y.clone(); 3], Some(&vec![theta.clone(); 3])).unwrap();
    assert!((three.total.regret - 3.0 * single).abs() <= 1e-12 * single);

    let flat = vec![0.2; n];
    let wiggly: Vec<f64> = (0..n).map(|i| if (i / 32) % 2 == 0 { 0.8 } else { -0.8 }).collect();
    let streams = vec![noisy(&flat, 0.1, 1), noisy(&wiggly, 0.1, 2)];
    let r = run_multidim(&cfg, &streams, Some(&[flat, wiggly])).unwrap();
    assert!(r.per_coordinate[0].regret < r.per_coordinate[1].regret);

    let ragged = vec![vec![0.0; n], vec![0.0; n - 1]];
    assert!(matches!(run_multidim(&cfg, &ragged, None), Err(Error::Dimension(_))));
}

#[test]
fn unknown_sigma_is_estimated() {
    let n = 1024;
    let theta = piecewise(n, 0, 6);
    let y = noisy(&theta, 0.3, 9);
    let cfg = AdaVawConfig::new(0, n, 1.0, 1.0).with_unknown_sigma();
    let run = run_policy(&cfg, &y, Some(&theta)).unwrap();
    let s = run.report.sigma.unwrap();
    assert!((0.2..0.45).contains(&s), "{s}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bins_partition_on_arbitrary_streams(
        y in prop::collection::vec(-2.0f64..2.0, 1..200),
        k in 0usize..4,
        sigma in 0.01f64..1.0,
    ) {
        let n = y.len();
        let run = run_policy(&AdaVawConfig::new(k, n, sigma, 2.0), &y, None).unwrap();
        prop_assert_eq!(run.trace.len(), n);
        let mut covered = run.bins.first().map(|b| b.start).unwrap_or(n + 1);
        prop_assert!(covered == k.max(1) || n < k.max(1));
        for b in &run.bins {
            prop_assert_eq!(b.start, covered);
            prop_assert!(b.end >= b.start);
            covered = b.end + 1;
        }
        if n >= k.max(1) {
            prop_assert_eq!(covered, n + 1);
        }
        for s in run.trace.iter().take(k.saturating_sub(1)) {
            prop_assert_eq!(s.prediction, 0.0);
        }
    }
}
