//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use adavaw_core::baselines::{restarting_ogd_batch_len, BaselineConfig, StepSchedule};
use adavaw_core::generators::{GeneratorKind, GeneratorSpec, NoiseKind};
use adavaw_core::policy::{AdaVawConfig, ThresholdLogBase};
use adavaw_core::seq::tv_k;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// A generator without horizon and seed; both come from the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTemplate {
    pub bound: f64,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

impl GeneratorTemplate {
    pub fn spec(&self, n: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n,
            bound: self.bound,
            seed,
            kind: self.kind.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    #[serde(default)]
    pub kind: NoiseKind,
}

fn default_meta_orders() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

/// A forecaster to evaluate. Noise level and bound default to the experiment's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    AdaVaw {
        k: usize,
        /// Overrides the noise level handed to the policy.
        #[serde(default)]
        sigma: Option<f64>,
        /// Estimate sigma from the data instead of using the known value.
        #[serde(default)]
        estimate_sigma: bool,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        threshold_log_base: ThresholdLogBase,
    },
    Meta {
        #[serde(default = "default_meta_orders")]
        orders: Vec<usize>,
    },
    MovingAverage {
        window: usize,
    },
    Ogd {
        #[serde(default = "inverse_time")]
        step_schedule: StepSchedule,
    },
    RestartingOgd {
        #[serde(default)]
        batch_len: Option<usize>,
        /// Variation budget used to tune the batch length. When both are absent it is
        /// the realised `TV^0` of the ground truth.
        #[serde(default)]
        c_n: Option<f64>,
    },
    OfflineWavelet {
        k: usize,
    },
}

fn inverse_time() -> StepSchedule {
    StepSchedule::InverseTime
}

impl PolicySpec {
    pub fn default_name(&self) -> String {
        match self {
            PolicySpec::AdaVaw { k, .. } => format!("ada_vaw_k{k}"),
            PolicySpec::Meta { .. } => "meta".into(),
            PolicySpec::MovingAverage { window } => format!("moving_average_w{window}"),
            PolicySpec::Ogd { .. } => "ogd".into(),
            PolicySpec::RestartingOgd { .. } => "restarting_ogd".into(),
            PolicySpec::OfflineWavelet { k } => format!("offline_wavelet_k{k}"),
        }
    }

    /// Largest TV order the policy needs; it bounds the smallest usable horizon.
    pub fn max_order(&self) -> usize {
        match self {
            PolicySpec::AdaVaw { k, .. } | PolicySpec::OfflineWavelet { k } => *k,
            PolicySpec::Meta { orders } => orders.iter().copied().max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::Meta { orders } if orders.is_empty() => {
                Err(HarnessError::config("meta policy needs at least one order"))
            }
            PolicySpec::MovingAverage { window: 0 } => {
                Err(HarnessError::config("moving average window must be at least 1"))
            }
            PolicySpec::RestartingOgd { batch_len: Some(0), .. } => {
                Err(HarnessError::config("batch_len must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Ada-VAW configs for horizon `n`: one for `ada_vaw`, one per order for `meta`,
    /// none for the baselines.
    pub fn ada_vaw_configs(&self, n: usize, noise_sigma: f64, bound: f64, seed: u64) -> Vec<AdaVawConfig> {
        match self {
            PolicySpec::AdaVaw {
                k,
                sigma,
                estimate_sigma,
                beta,
                delta,
                threshold_log_base,
            } => {
                let mut c = AdaVawConfig::new(*k, n, sigma.unwrap_or(noise_sigma), bound)
                    .with_threshold_log_base(*threshold_log_base)
                    .with_seed(seed);
                if let Some(d) = delta {
                    c = c.with_delta(*d);
                }
                if let Some(b) = beta {
                    c = c.with_beta(*b);
                }
                if *estimate_sigma {
                    c = c.with_unknown_sigma();
                }
                vec![c]
            }
            PolicySpec::Meta { orders } => orders
                .iter()
                .map(|&k| AdaVawConfig::new(k, n, noise_sigma, bound).with_seed(seed))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Baseline config, or `None` for the online policies.
    pub fn baseline(&self, noise_sigma: f64, bound: f64, theta: Option<&[f64]>, n: usize) -> Result<Option<BaselineConfig>> {
        Ok(match self {
            PolicySpec::MovingAverage { window } => Some(BaselineConfig::MovingAverage { window: *window }),
            PolicySpec::Ogd { step_schedule } => Some(BaselineConfig::Ogd {
                bound,
                step_schedule: *step_schedule,
            }),
            PolicySpec::RestartingOgd { batch_len, c_n } => {
                let batch_len = match (batch_len, c_n, theta) {
                    (Some(b), _, _) => *b,
                    (None, Some(c), _) => restarting_ogd_batch_len(n, *c),
                    (None, None, Some(th)) => restarting_ogd_batch_len(n, tv_k(th, 0)?),
                    (None, None, None) => {
                        return Err(HarnessError::config(
                            "restarting_ogd needs batch_len or c_n when the ground truth is unknown",
                        ))
                    }
                };
                Some(BaselineConfig::RestartingOgd { bound, batch_len })
            }
            PolicySpec::OfflineWavelet { k } => Some(BaselineConfig::OfflineWavelet {
                k: *k,
                sigma: noise_sigma,
            }),
            PolicySpec::AdaVaw { .. } | PolicySpec::Meta { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    /// Label used in output paths and the summary; defaults to [`PolicySpec::default_name`].
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: PolicySpec,
}

impl PolicyEntry {
    pub fn new(spec: PolicySpec) -> Self {
        Self { name: None, spec }
    }

    pub fn named(name: impl Into<String>, spec: PolicySpec) -> Self {
        Self {
            name: Some(name.into()),
            spec,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.default_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorTemplate,
    pub noise: NoiseConfig,
    pub policies: Vec<PolicyEntry>,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Write `trace.csv` for every cell.
    #[serde(default = "yes")]
    pub write_traces: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(HarnessError::config("no policies"));
        }
        if self.n_grid.is_empty() {
            return Err(HarnessError::config("n_grid is empty"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds is empty"));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(HarnessError::config("noise sigma must be nonnegative"));
        }
        if self.threads == Some(0) {
            return Err(HarnessError::config("threads must be positive"));
        }
        let mut labels = Vec::new();
        for p in &self.policies {
            p.spec.validate()?;
            let l = p.label();
            if labels.contains(&l) {
                return Err(HarnessError::config(format!("duplicate policy name {l}")));
            }
            labels.push(l);
        }
        let order = self
            .policies
            .iter()
            .map(|p| p.spec.max_order())
            .chain([self.generator.kind.order()])
            .max()
            .unwrap_or(0);
        let smallest = order + 2;
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < smallest) {
            return Err(HarnessError::config(format!(
                "horizon {n} is too short for order {order}; need at least {smallest}"
            )));
        }
        Ok(())
    }
}

/// Noise seed paired with a ground-truth seed; every policy in a cell sees the same stream.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Ground truth plus noise for `generate` and `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub generator: GeneratorTemplate,
    pub n: usize,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

/// One policy on one stream, read from `input` or simulated from `stream`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policy: PolicyEntry,
    /// Noise level handed to the policy; defaults to the stream's noise level.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Bound on `|theta_t|`; defaults to the generator bound.
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub stream: Option<StreamConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Reads any of the JSON configs.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}
