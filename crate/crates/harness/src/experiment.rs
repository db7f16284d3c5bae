//! Sweeps over (policy, horizon, seed) cells.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adavaw_core::baselines::{run_baseline, BaselineConfig};
use adavaw_core::generators::{generate, noise, NoiseKind};
use adavaw_core::policy::{meta_ewa, run_policy};
use adavaw_core::RegretReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{noise_seed, ExperimentConfig, GeneratorTemplate, PolicyEntry, PolicySpec};
use crate::error::{csv_err, HarnessError, Result};
use crate::io::{write_atomic, write_report, write_trace, TraceRow};
use crate::scaling::{fit_scaling, ScalingFit};

/// Ground truth and observations for one (horizon, seed) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub theta: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draws the ground truth with `seed` and the noise with [`noise_seed`]`(seed)`.
pub fn simulate(
    generator: &GeneratorTemplate,
    sigma: f64,
    kind: NoiseKind,
    n: usize,
    seed: u64,
) -> Result<Simulated> {
    let ts = generate(&generator.spec(n, seed))?;
    let theta = ts.theta().expect("generators populate theta").to_vec();
    let eps = noise(n, sigma, kind, noise_seed(seed))?;
    let y = theta.iter().zip(&eps).map(|(a, b)| a + b).collect();
    Ok(Simulated { theta, y })
}

/// Report and per-step trace of one policy on one stream.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub report: RegretReport,
    pub trace: Vec<TraceRow>,
}

/// Runs `spec` on `y`. Regret is measured against `theta` when given, else against `y`.
pub fn run_cell(
    spec: &PolicySpec,
    noise_sigma: f64,
    bound: f64,
    y: &[f64],
    theta: Option<&[f64]>,
    seed: u64,
) -> Result<CellRun> {
    spec.validate()?;
    let n = y.len();
    let rows = |preds: &[f64], restarted: &dyn Fn(usize) -> bool, bin: &dyn Fn(usize) -> usize| {
        (0..n)
            .map(|i| TraceRow {
                t: i + 1,
                y: y[i],
                theta: theta.map(|th| th[i]),
                prediction: preds[i],
                restarted: restarted(i),
                bin_id: bin(i),
            })
            .collect::<Vec<_>>()
    };
    match spec {
        PolicySpec::AdaVaw { .. } => {
            let cfg = spec
                .ada_vaw_configs(n, noise_sigma, bound, seed)
                .pop()
                .expect("one config per ada_vaw policy");
            let run = run_policy(&cfg, y, theta)?;
            let trace = run
                .trace
                .iter()
                .map(|s| TraceRow {
                    t: s.t,
                    y: s.observation,
                    theta: theta.map(|th| th[s.t - 1]),
                    prediction: s.prediction,
                    restarted: s.restarted,
                    bin_id: s.bin_id,
                })
                .collect();
            Ok(CellRun {
                report: run.report,
                trace,
            })
        }
        PolicySpec::Meta { .. } => {
            let cfgs = spec.ada_vaw_configs(n, noise_sigma, bound, seed);
            let run = meta_ewa(&cfgs, y, theta, bound, n)?;
            let trace = rows(&run.predictions, &|_| false, &|_| 0);
            Ok(CellRun {
                report: RegretReport {
                    num_bins: run.instances.iter().map(|r| r.num_bins).max().unwrap_or(1),
                    ..run.report
                },
                trace,
            })
        }
        _ => {
            let cfg = spec
                .baseline(noise_sigma, bound, theta, n)?
                .expect("remaining specs are baselines");
            let (report, preds) = run_baseline(&cfg, y, theta, seed)?;
            let trace = match cfg {
                BaselineConfig::RestartingOgd { batch_len, .. } => {
                    rows(&preds, &|i| (i + 1) % batch_len == 0, &|i| i / batch_len)
                }
                _ => rows(&preds, &|_| false, &|_| 0),
            };
            Ok(CellRun { report, trace })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub policy: String,
    pub n: usize,
    pub seed: u64,
    /// Present whenever the policy ran, even if writing its files failed.
    pub report: Option<RegretReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub n: usize,
    pub median_regret: f64,
    pub median_num_bins: f64,
    /// Seeds that produced a report.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by policy order in the config, then horizon, then seed.
    pub cells: Vec<CellResult>,
    /// Sorted by policy order in the config, then horizon.
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn median(&self, policy: &str, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.policy == policy && r.n == n)
            .map(|r| r.median_regret)
    }

    /// Log-log fit of median regret against `n` for one policy.
    pub fn scaling(&self, policy: &str) -> Result<ScalingFit> {
        let data: Vec<(usize, f64)> = self
            .summary
            .iter()
            .filter(|r| r.policy == policy)
            .map(|r| (r.n, r.median_regret))
            .collect();
        fit_scaling(&data)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Median with the mean of the two middle values for even counts; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

pub fn cell_dir(root: &Path, policy: &str, n: usize, seed: u64) -> PathBuf {
    root.join(policy).join(format!("n{n}")).join(format!("seed{seed}"))
}

/// Runs every cell, writes per-cell files and `summary.csv` when `output_dir` is set.
///
/// Failures of single cells, including IO failures, are recorded in the result and
/// do not stop the sweep. Invalid configs fail up front.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?
    };
    pool.install(|| sweep(config))
}

fn sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let pairs: Vec<(usize, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let streams: Vec<std::result::Result<Simulated, String>> = pairs
        .par_iter()
        .map(|&(n, seed)| {
            simulate(&config.generator, config.noise.sigma, config.noise.kind, n, seed)
                .map_err(|e| e.to_string())
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..pairs.len()).map(move |s| (p, s)))
        .collect();
    let mut cells: Vec<(usize, usize, CellResult)> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let (n, seed) = pairs[s];
            let cell = one_cell(config, &config.policies[p], &streams[s], n, seed);
            (p, s, cell)
        })
        .collect();
    cells.sort_by_key(|&(p, s, _)| (p, pairs[s].0, pairs[s].1));
    let cells: Vec<CellResult> = cells.into_iter().map(|c| c.2).collect();
    let summary = summarize(&config.policies, &cells);

    if let Some(dir) = &config.output_dir {
        write_summary(&dir.join("summary.csv"), &cells)?;
        write_medians(&dir.join("medians.csv"), &summary)?;
        let failed: Vec<&CellResult> = cells.iter().filter(|c| c.error.is_some()).collect();
        if !failed.is_empty() {
            crate::io::write_json(&dir.join("errors.json"), &failed)?;
        }
    }
    Ok(ExperimentResult { cells, summary })
}

fn one_cell(
    config: &ExperimentConfig,
    entry: &PolicyEntry,
    stream: &std::result::Result<Simulated, String>,
    n: usize,
    seed: u64,
) -> CellResult {
    let policy = entry.label();
    let mut cell = CellResult {
        policy: policy.clone(),
        n,
        seed,
        report: None,
        error: None,
    };
    let sim = match stream {
        Ok(s) => s,
        Err(e) => {
            cell.error = Some(format!("generation failed: {e}"));
            return cell;
        }
    };
    let run = match run_cell(
        &entry.spec,
        config.noise.sigma,
        config.generator.bound,
        &sim.y,
        Some(&sim.theta),
        seed,
    ) {
        Ok(r) => r,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    if let Some(root) = &config.output_dir {
        let dir = cell_dir(root, &policy, n, seed);
        let written = (|| {
            if config.write_traces {
                write_trace(&dir.join("trace.csv"), &run.trace)?;
            }
            write_report(&dir.join("report.json"), &run.report)
        })();
        if let Err(e) = written {
            cell.error = Some(e.to_string());
        }
    }
    cell.report = Some(run.report);
    cell
}

fn summarize(policies: &[PolicyEntry], cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in cells {
        let Some(r) = &c.report else { continue };
        let p = policies
            .iter()
            .position(|e| e.label() == c.policy)
            .expect("cells come from configured policies");
        let g = groups.entry((p, c.n)).or_default();
        g.0.push(r.regret);
        g.1.push(r.num_bins as f64);
    }
    groups
        .into_iter()
        .map(|((p, n), (regret, bins))| SummaryRow {
            policy: policies[p].label(),
            n,
            median_regret: median(&regret).expect("nonempty group"),
            median_num_bins: median(&bins).expect("nonempty group"),
            seeds: regret.len(),
        })
        .collect()
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    policy: &'a str,
    n: usize,
    seed: u64,
    regret: f64,
    num_bins: usize,
    wallclock_ms: f64,
}

/// `policy,n,seed,regret,num_bins,wallclock_ms`, one line per successful cell.
pub fn summary_csv(cells: &[CellResult]) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(["policy", "n", "seed", "regret", "num_bins", "wallclock_ms"])?;
    for c in cells {
        if let Some(r) = &c.report {
            w.serialize(SummaryLine {
                policy: &c.policy,
                n: c.n,
                seed: c.seed,
                regret: r.regret,
                num_bins: r.num_bins,
                wallclock_ms: r.wallclock_ms,
            })?;
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn write_summary(path: &Path, cells: &[CellResult]) -> Result<()> {
    let bytes = summary_csv(cells).map_err(csv_err(path))?;
    write_atomic(path, &bytes)
}

pub fn write_medians(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Long format `policy,n,seed,metric,value` for external plotting tools.
pub fn write_plot_data(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["policy", "n", "seed", "metric", "value"])
        .map_err(csv_err(path))?;
    for c in cells {
        let Some(r) = &c.report else { continue };
        for (metric, value) in [
            ("regret", r.regret),
            ("num_bins", r.num_bins as f64),
            ("wallclock_ms", r.wallclock_ms),
        ] {
            w.write_record([
                c.policy.clone(),
                c.n.to_string(),
                c.seed.to_string(),
                metric.to_string(),
                value.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[4.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }
}
