//! The Ada-VAW forecaster, its EWA meta-policy over TV orders, and the
//! coordinate-wise multi-dimensional runner.
//!
//! Ada-VAW runs a VAW forecaster on monomial features of the time elapsed since the
//! current bin started. After each observation the window `y[t_h - k ..= t]` is
//! recentered (polynomial fit removed), split into its two dyadic segments, transformed
//! with a wavelet basis of `k + 1` vanishing moments and soft-thresholded. When the
//! energy left after shrinkage exceeds `sigma` a new bin starts at `t + 1`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::{recenter, MonomialFeature, VawState};
use crate::report::{squared_error, RegretReport};
use crate::wavelet::{estimate_sigma_mad, min_length, pack, DwtBasis};

/// Observations used by the MAD noise pre-pass when `sigma` is not given.
pub const MAD_PREFIX: usize = 512;

/// Which length enters the `log` of the soft-threshold level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdLogBase {
    /// `sigma * sqrt(beta * log l)` with `l` the segment length.
    #[default]
    SegmentLength,
    /// `sigma * sqrt(beta * log n)` with `n` the horizon.
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaVawConfig {
    pub k: usize,
    pub n: usize,
    /// Sub-gaussian noise parameter. `None` asks [`run_policy`] to estimate it.
    pub sigma: Option<f64>,
    /// Bound on `|theta_t|`.
    pub bound: f64,
    pub beta: f64,
    pub delta: f64,
    #[serde(default)]
    pub threshold_log_base: ThresholdLogBase,
    #[serde(default)]
    pub seed: u64,
}

impl AdaVawConfig {
    pub const DEFAULT_DELTA: f64 = 0.1;

    /// Config with `delta = 0.1` and the matching default `beta`.
    pub fn new(k: usize, n: usize, sigma: f64, bound: f64) -> Self {
        Self {
            k,
            n,
            sigma: Some(sigma),
            bound,
            beta: Self::default_beta(n, Self::DEFAULT_DELTA),
            delta: Self::DEFAULT_DELTA,
            threshold_log_base: ThresholdLogBase::default(),
            seed: 0,
        }
    }

    /// `24 + 8 log(8 / delta) / log n`.
    pub fn default_beta(n: usize, delta: f64) -> f64 {
        24.0 + 8.0 * (8.0 / delta).ln() / (n.max(2) as f64).ln()
    }

    /// Sets `delta` and recomputes the default `beta`.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self.beta = Self::default_beta(self.n, delta);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold_log_base(mut self, base: ThresholdLogBase) -> Self {
        self.threshold_log_base = base;
        self
    }

    pub fn with_unknown_sigma(mut self) -> Self {
        self.sigma = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("horizon n must be positive"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::config(format!("bound must be positive, got {}", self.bound)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        Ok(())
    }
}

/// A maximal interval served by one VAW instance. `start..=end` are 1-based times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub start: usize,
    pub end: usize,
    /// Last restart statistic computed inside the bin.
    pub restart_statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: usize,
    pub prediction: f64,
    pub observation: f64,
    pub restarted: bool,
    pub bin_id: usize,
    /// `||T(W a)||_2 + ||T(W b)||_2`, zero when the check was skipped.
    pub statistic: f64,
}

/// Online Ada-VAW state machine. Each round is `predict()` followed by `observe(y)`.
#[derive(Debug, Clone)]
pub struct AdaVaw {
    k: usize,
    n: usize,
    sigma: f64,
    beta: f64,
    log_base: ThresholdLogBase,
    /// Completed rounds.
    t: usize,
    pending: Option<f64>,
    history: Vec<f64>,
    /// Start of the current bin, `t_h`.
    bin_start: usize,
    vaw: Option<VawState>,
    bins: Vec<BinRecord>,
    bin_id: usize,
    last_statistic: f64,
}

impl AdaVaw {
    pub fn new(config: &AdaVawConfig) -> Result<Self> {
        config.validate()?;
        let sigma = config
            .sigma
            .ok_or_else(|| Error::config("sigma must be known to run online; use run_policy to estimate it"))?;
        Ok(Self {
            k: config.k,
            n: config.n,
            sigma,
            beta: config.beta,
            log_base: config.threshold_log_base,
            t: 0,
            pending: None,
            history: Vec::with_capacity(config.n),
            bin_start: config.k.max(1),
            vaw: None,
            bins: Vec::new(),
            bin_id: 0,
            last_statistic: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Rounds completed so far.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn bin_start(&self) -> usize {
        self.bin_start
    }

    /// First observation borrowed by the current bin: `max(1, t_h - k)`.
    fn window_start(&self) -> usize {
        self.bin_start.saturating_sub(self.k).max(1)
    }

    fn feature(&self, t: usize) -> Result<MonomialFeature> {
        MonomialFeature::new(t - self.window_start() + 1, self.k)
    }

    /// Prediction for round `time() + 1`.
    pub fn predict(&mut self) -> Result<f64> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without observe".into()));
        }
        let t = self.t + 1;
        if t > self.n {
            return Err(Error::HorizonExhausted { t, n: self.n });
        }
        let pred = if t < self.bin_start {
            0.0
        } else {
            if self.vaw.is_none() {
                self.vaw = Some(self.seed_bin()?);
            }
            let x = self.feature(t)?;
            let vaw = self.vaw.as_mut().expect("bin state initialised above");
            vaw.absorb_feature(x.as_slice())?;
            vaw.predict(x.as_slice())?
        };
        self.pending = Some(pred);
        Ok(pred)
    }

    /// Fresh VAW state holding the observations borrowed from before `t_h`.
    fn seed_bin(&self) -> Result<VawState> {
        let mut vaw = VawState::new(self.k);
        for s in self.window_start()..self.bin_start {
            let x = self.feature(s)?;
            vaw.absorb_feature(x.as_slice())?;
            vaw.absorb_label(x.as_slice(), self.history[s - 1])?;
        }
        Ok(vaw)
    }

    /// Reveals `y` for the pending round and applies the restart rule.
    pub fn observe(&mut self, y: f64) -> Result<StepTrace> {
        let prediction = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("observe called before predict".into()))?;
        let t = self.t + 1;
        self.t = t;
        self.history.push(y);
        let bin_id = self.bin_id;

        let mut restarted = false;
        let mut statistic = 0.0;
        if t >= self.bin_start {
            let x = self.feature(t)?;
            if let Some(vaw) = self.vaw.as_mut() {
                vaw.absorb_label(x.as_slice(), y)?;
            }
            statistic = self.restart_statistic(self.window_start(), t)?;
            self.last_statistic = statistic;
            if statistic > self.sigma {
                restarted = true;
                self.bins.push(BinRecord {
                    start: self.bin_start,
                    end: t,
                    restart_statistic: statistic,
                });
                self.bin_start = t + 1;
                self.vaw = None;
                self.bin_id += 1;
                self.last_statistic = 0.0;
            }
        }

        Ok(StepTrace {
            t,
            prediction,
            observation: y,
            restarted,
            bin_id,
            statistic,
        })
    }

    /// Soft-thresholded wavelet energy of the recentered window `y[s..=e]`.
    /// Windows too short for a dyadic basis of order `k` give 0.
    fn restart_statistic(&self, s: usize, e: usize) -> Result<f64> {
        let window = &self.history[s - 1..e];
        if window.len() < min_length(self.k) {
            return Ok(0.0);
        }
        let seg = 1usize << window.len().ilog2();
        let log_len = match self.log_base {
            ThresholdLogBase::SegmentLength => seg,
            ThresholdLogBase::Horizon => self.n.max(2),
        };
        let lambda = self.sigma * (self.beta * (log_len as f64).ln()).sqrt();
        packed_energy(window, self.k, lambda)
    }

    /// Closed bins followed by the current one, if it has started.
    pub fn bins(&self) -> Vec<BinRecord> {
        let mut out = self.bins.clone();
        if self.bin_start <= self.t {
            out.push(BinRecord {
                start: self.bin_start,
                end: self.t,
                restart_statistic: self.last_statistic,
            });
        }
        out
    }
}

/// `||T(W a)||_2 + ||T(W b)||_2` where `a`, `b` are the [`pack`] segments of the
/// recentered window and `T` soft-thresholds at `lambda`.
pub fn packed_energy(window: &[f64], k: usize, lambda: f64) -> Result<f64> {
    let residual = recenter(window, k)?;
    let (first, second) = pack(&residual)?;
    let basis = DwtBasis::cached(first.len(), k)?;
    let a = basis.forward(first)?.soft_threshold(lambda)?.l2_norm();
    let b = basis.forward(second)?.soft_threshold(lambda)?.l2_norm();
    Ok(a + b)
}

/// Everything a batch run produces.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub report: RegretReport,
    pub trace: Vec<StepTrace>,
    pub bins: Vec<BinRecord>,
}

impl PolicyRun {
    pub fn predictions(&self) -> Vec<f64> {
        self.trace.iter().map(|s| s.prediction).collect()
    }
}

fn check_stream(n: usize, y: &[f64], theta: Option<&[f64]>) -> Result<()> {
    if y.len() != n {
        return Err(Error::dim(format!(
            "stream has {} observations, horizon is {n}",
            y.len()
        )));
    }
    if let Some(th) = theta {
        if th.len() != n {
            return Err(Error::dim(format!(
                "ground truth has {} values, horizon is {n}",
                th.len()
            )));
        }
    }
    Ok(())
}

/// Resolves an unknown `sigma` with the MAD estimate on the first observations.
pub fn resolve_sigma(config: &AdaVawConfig, y: &[f64]) -> Result<AdaVawConfig> {
    let mut c = config.clone();
    if c.sigma.is_none() {
        let prefix = &y[..y.len().min(MAD_PREFIX)];
        let est = estimate_sigma_mad(prefix, c.k)?;
        if !(est > 0.0) {
            return Err(Error::Numerical(
                "MAD noise estimate is zero; pass sigma explicitly".into(),
            ));
        }
        c.sigma = Some(est);
    }
    Ok(c)
}

/// Runs Ada-VAW over a full stream.
pub fn run_policy(config: &AdaVawConfig, y: &[f64], theta: Option<&[f64]>) -> Result<PolicyRun> {
    config.validate()?;
    check_stream(config.n, y, theta)?;
    let config = resolve_sigma(config, y)?;
    let start = Instant::now();
    let mut policy = AdaVaw::new(&config)?;
    let mut trace = Vec::with_capacity(config.n);
    for &yt in y {
        policy.predict()?;
        trace.push(policy.observe(yt)?);
    }
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let preds: Vec<f64> = trace.iter().map(|s| s.prediction).collect();
    let regret = squared_error(&preds, theta.unwrap_or(y));
    let bins = policy.bins();
    Ok(PolicyRun {
        report: RegretReport {
            regret,
            n: config.n,
            k: config.k,
            num_bins: bins.len(),
            beta: Some(config.beta),
            sigma: config.sigma,
            seed: config.seed,
            wallclock_ms: elapsed,
        },
        trace,
        bins,
    })
}

/// Exponentially weighted average forecaster over a fixed set of experts.
#[derive(Debug, Clone)]
pub struct Ewa {
    eta: f64,
    /// Cumulative squared losses against the observations.
    losses: Vec<f64>,
}

impl Ewa {
    pub fn new(experts: usize, eta: f64) -> Result<Self> {
        if experts == 0 {
            return Err(Error::config("EWA needs at least one expert"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config(format!("EWA rate must be positive, got {eta}")));
        }
        Ok(Self {
            eta,
            losses: vec![0.0; experts],
        })
    }

    /// `1 / (4 (B + sqrt(2 log(2 n^2)))^2)`.
    pub fn meta_rate(bound: f64, n: usize) -> f64 {
        let nf = n as f64;
        let r = bound + (2.0 * (2.0 * nf * nf).ln()).sqrt();
        1.0 / (4.0 * r * r)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn weights(&self) -> Vec<f64> {
        let best = self.losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = self
            .losses
            .iter()
            .map(|l| (-self.eta * (l - best)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }

    pub fn predict(&self, expert_predictions: &[f64]) -> Result<f64> {
        if expert_predictions.len() != self.losses.len() {
            return Err(Error::dim("expert count changed"));
        }
        Ok(self
            .weights()
            .iter()
            .zip(expert_predictions)
            .map(|(w, p)| w * p)
            .sum())
    }

    pub fn update(&mut self, expert_predictions: &[f64], y: f64) -> Result<()> {
        if expert_predictions.len() != self.losses.len() {
            return Err(Error::dim("expert count changed"));
        }
        for (l, p) in self.losses.iter_mut().zip(expert_predictions) {
            *l += (y - p) * (y - p);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MetaRun {
    pub report: RegretReport,
    pub predictions: Vec<f64>,
    pub instances: Vec<RegretReport>,
    pub final_weights: Vec<f64>,
    pub eta: f64,
}

/// Runs one Ada-VAW instance per config in lockstep and aggregates them with EWA.
///
/// All configs must share the horizon `n`; the usual choice is `k = 0, 1, 2, 3`.
pub fn meta_ewa(
    configs: &[AdaVawConfig],
    y: &[f64],
    theta: Option<&[f64]>,
    bound: f64,
    n: usize,
) -> Result<MetaRun> {
    if configs.is_empty() {
        return Err(Error::config("meta-policy needs at least one instance"));
    }
    check_stream(n, y, theta)?;
    if !(bound > 0.0) {
        return Err(Error::config("bound must be positive"));
    }
    let start = Instant::now();
    let mut instances = Vec::with_capacity(configs.len());
    for c in configs {
        if c.n != n {
            return Err(Error::config("all meta-policy instances must share the horizon"));
        }
        let c = resolve_sigma(c, y)?;
        instances.push(AdaVaw::new(&c)?);
    }
    let eta = Ewa::meta_rate(bound, n);
    let mut ewa = Ewa::new(instances.len(), eta)?;
    let mut preds = Vec::with_capacity(n);
    let mut inst_preds = vec![Vec::with_capacity(n); instances.len()];
    let mut round = vec![0.0; instances.len()];
    for &yt in y {
        for (i, inst) in instances.iter_mut().enumerate() {
            round[i] = inst.predict()?;
            inst_preds[i].push(round[i]);
        }
        preds.push(ewa.predict(&round)?);
        for inst in instances.iter_mut() {
            inst.observe(yt)?;
        }
        ewa.update(&round, yt)?;
    }
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let target = theta.unwrap_or(y);
    let reports = configs
        .iter()
        .zip(&instances)
        .zip(&inst_preds)
        .map(|((c, inst), p)| RegretReport {
            regret: squared_error(p, target),
            n,
            k: c.k,
            num_bins: inst.bins().len(),
            beta: Some(c.beta),
            sigma: Some(inst.sigma()),
            seed: c.seed,
            wallclock_ms: elapsed,
        })
        .collect();
    Ok(MetaRun {
        report: RegretReport {
            regret: squared_error(&preds, target),
            n,
            k: configs.iter().map(|c| c.k).max().unwrap_or(0),
            num_bins: 0,
            beta: None,
            sigma: None,
            seed: configs[0].seed,
            wallclock_ms: elapsed,
        },
        predictions: preds,
        instances: reports,
        final_weights: ewa.weights(),
        eta,
    })
}

#[derive(Debug, Clone)]
pub struct MultiRun {
    /// Summed over coordinates.
    pub total: RegretReport,
    pub per_coordinate: Vec<RegretReport>,
}

/// One independent Ada-VAW instance per coordinate.
pub fn run_multidim(
    config: &AdaVawConfig,
    streams: &[Vec<f64>],
    theta: Option<&[Vec<f64>]>,
) -> Result<MultiRun> {
    if streams.is_empty() {
        return Err(Error::dim("no coordinate streams"));
    }
    if streams.iter().any(|s| s.len() != config.n) {
        return Err(Error::dim("coordinate streams must all have length n"));
    }
    if let Some(th) = theta {
        if th.len() != streams.len() {
            return Err(Error::dim("ground truth and streams differ in dimension"));
        }
    }
    let start = Instant::now();
    let per_coordinate = streams
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            run_policy(config, y, theta.map(|th| th[i].as_slice())).map(|r| r.report)
        })
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(MultiRun {
        total: RegretReport {
            regret: per_coordinate.iter().map(|r| r.regret).sum(),
            n: config.n,
            k: config.k,
            num_bins: per_coordinate.iter().map(|r| r.num_bins).sum(),
            beta: Some(config.beta),
            sigma: config.sigma,
            seed: config.seed,
            wallclock_ms: elapsed,
        },
        per_coordinate,
    })
}
