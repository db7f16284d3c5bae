use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use adavaw_core::generators::GeneratorKind;
use adavaw_core::policy::{run_policy, AdaVawConfig};
use adavaw_harness::config::{load_json, RunConfig, StreamConfig};
use adavaw_harness::experiment::{summary_csv, write_plot_data};
use adavaw_harness::io::{read_stream, series_csv, write_report, write_series, write_trace};
use adavaw_harness::{
    padding_demo, run_cell, run_experiment, simulate, ExperimentConfig, GeneratorTemplate,
    HarnessError, NoiseConfig, PolicySpec, Result,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adavaw", version, about = "Forecasting sequences of bounded higher-order total variation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ground truth (and noisy observations) and write `t,theta[,y]`.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        /// Noise level; 0 writes the ground truth only.
        #[arg(long)]
        sigma: Option<f64>,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one policy on one stream and write `trace.csv` and `report.json`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Input CSV `t,y[,theta]`, replacing the configured stream.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Order for `ada_vaw` and `offline_wavelet` policies.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Time Ada-VAW on doubling horizons, single-threaded.
    Bench {
        /// Experiment config; its generator, noise and first `ada_vaw` policy are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Horizons; defaults to 2^11, 2^12, 2^13.
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Run every (policy, n, seed) cell of an experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long)]
        seed: u64,
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Compare pack with zero and mirror padding on a synthetic window.
    PaddingDemo {
        /// JSON `{"window": [..], "k": ..}`; replaces the synthetic window.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 48)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Shape::Linear)]
        shape: Shape,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Linear,
    Constant,
    /// Piecewise polynomial drawn with the seed.
    Random,
}

#[derive(serde::Deserialize)]
struct PaddingConfig {
    window: Vec<f64>,
    k: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { config, seed, n, sigma, output } => {
            let mut c: StreamConfig = load_json(&config)?;
            if let Some(n) = n {
                c.n = n;
            }
            if let Some(s) = sigma {
                c.noise = Some(NoiseConfig { sigma: s, kind: c.noise.map(|x| x.kind).unwrap_or_default() });
            }
            let noise = c.noise.unwrap_or(NoiseConfig { sigma: 0.0, kind: Default::default() });
            let sim = simulate(&c.generator, noise.sigma, noise.kind, c.n, seed)?;
            let y = (noise.sigma > 0.0).then_some(sim.y.as_slice());
            match output {
                Some(path) => write_series(&path, &sim.theta, y),
                None => stdout(&series_csv(&sim.theta, y)),
            }
        }
        Command::Run { config, seed, input, n, sigma, k, output, emit_plot_data } => {
            let mut c: RunConfig = load_json(&config)?;
            if let Some(p) = input {
                c.input = Some(p);
            }
            if let Some(s) = sigma {
                c.sigma = Some(s);
            }
            if let Some(out) = output {
                c.output_dir = Some(out);
            }
            if let Some(k) = k {
                match &mut c.policy.spec {
                    PolicySpec::AdaVaw { k: kk, .. } | PolicySpec::OfflineWavelet { k: kk } => *kk = k,
                    _ => return Err(HarnessError::config("--k applies to ada_vaw and offline_wavelet only")),
                }
            }
            if let (Some(n), Some(s)) = (n, c.stream.as_mut()) {
                s.n = n;
            }
            run_one(&c, seed, emit_plot_data)
        }
        Command::Bench { config, seed, k, n, reps } => bench(config.as_deref(), seed, k, n, reps),
        Command::Sweep { config, seed, n, sigma, threads, output, emit_plot_data } => {
            let mut c = ExperimentConfig::load(&config)?;
            for s in c.seeds.iter_mut() {
                *s = s.wrapping_add(seed);
            }
            if !n.is_empty() {
                c.n_grid = n;
            }
            if let Some(s) = sigma {
                c.noise.sigma = s;
            }
            if threads.is_some() {
                c.threads = threads;
            }
            if let Some(out) = output {
                c.output_dir = Some(out);
            }
            let res = run_experiment(&c)?;
            if emit_plot_data {
                let dir = c
                    .output_dir
                    .as_ref()
                    .ok_or_else(|| HarnessError::config("--emit-plot-data needs an output directory"))?;
                write_plot_data(&dir.join("plot_data.csv"), &res.cells)?;
            }
            if c.output_dir.is_none() {
                let bytes = summary_csv(&res.cells)
                    .map_err(|source| HarnessError::Csv { path: "<stdout>".into(), source })?;
                stdout(&bytes)?;
            }
            for r in &res.summary {
                eprintln!("{:<24} n={:<7} median regret {:.6} ({} seeds)", r.policy, r.n, r.median_regret, r.seeds);
            }
            let failed: Vec<_> = res.failures().collect();
            for f in &failed {
                eprintln!("failed: {} n={} seed={}: {}", f.policy, f.n, f.seed, f.error.as_deref().unwrap_or(""));
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(HarnessError::CellsFailed { failed: failed.len(), total: res.cells.len() })
            }
        }
        Command::PaddingDemo { config, seed, length, k, shape } => {
            let (window, k) = match config {
                Some(p) => {
                    let c: PaddingConfig = load_json(&p)?;
                    (c.window, c.k)
                }
                None => (synthetic_window(shape, length, k, seed)?, k),
            };
            let demo = padding_demo(&window, k)?;
            println!("{}", serde_json::to_string_pretty(&demo).expect("plain struct serializes"));
            Ok(())
        }
    }
}

fn stdout(bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    std::io::stdout()
        .write_all(bytes)
        .map_err(|source| HarnessError::Io { path: "<stdout>".into(), source })
}

fn synthetic_window(shape: Shape, length: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(match shape {
        Shape::Linear => (1..=length).map(|i| i as f64 / length as f64).collect(),
        Shape::Constant => vec![1.0; length],
        Shape::Random => {
            let g = GeneratorTemplate {
                bound: 1.0,
                kind: GeneratorKind::PiecewisePoly { k, knots: 2, coeff_range: 1.0, continuous: true },
            };
            simulate(&g, 0.0, Default::default(), length, seed)?.theta
        }
    })
}

fn run_one(c: &RunConfig, seed: u64, emit_plot_data: bool) -> Result<()> {
    let (y, theta, noise_sigma, gen_bound) = match (&c.input, &c.stream) {
        (Some(path), _) => {
            let s = read_stream(path)?;
            (s.y, s.theta, None, None)
        }
        (None, Some(s)) => {
            let noise = s
                .noise
                .ok_or_else(|| HarnessError::config("stream needs a noise block to produce observations"))?;
            let sim = simulate(&s.generator, noise.sigma, noise.kind, s.n, seed)?;
            (sim.y, Some(sim.theta), Some(noise.sigma), Some(s.generator.bound))
        }
        (None, None) => return Err(HarnessError::config("run needs an input CSV or a stream")),
    };
    let sigma = c
        .sigma
        .or(noise_sigma)
        .ok_or_else(|| HarnessError::config("sigma is unknown; set it in the config or with --sigma"))?;
    let bound = c.bound.or(gen_bound).unwrap_or_else(|| y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12));
    let run = run_cell(&c.policy.spec, sigma, bound, &y, theta.as_deref(), seed)?;
    if let Some(dir) = &c.output_dir {
        write_trace(&dir.join("trace.csv"), &run.trace)?;
        write_report(&dir.join("report.json"), &run.report)?;
        if emit_plot_data {
            write_trace_long(&dir.join("plot_data.csv"), &run.trace)?;
        }
    } else if emit_plot_data {
        return Err(HarnessError::config("--emit-plot-data needs an output directory"));
    }
    println!("{}", serde_json::to_string_pretty(&run.report).expect("plain struct serializes"));
    Ok(())
}

/// `t,series,value` rows for y, theta and the prediction.
fn write_trace_long(path: &Path, trace: &[adavaw_harness::io::TraceRow]) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row {
        t: usize,
        series: &'static str,
        value: f64,
    }
    let rows: Vec<Row> = trace
        .iter()
        .flat_map(|r| {
            let mut v = vec![
                Row { t: r.t, series: "y", value: r.y },
                Row { t: r.t, series: "prediction", value: r.prediction },
            ];
            if let Some(th) = r.theta {
                v.push(Row { t: r.t, series: "theta", value: th });
            }
            v
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    adavaw_harness::io::write_atomic(path, &bytes)
}

fn bench(config: Option<&Path>, seed: u64, k: usize, n: Vec<usize>, reps: usize) -> Result<()> {
    let n = if n.is_empty() { vec![1 << 11, 1 << 12, 1 << 13] } else { n };
    if reps == 0 {
        return Err(HarnessError::config("reps must be positive"));
    }
    let (generator, noise, base) = match config {
        Some(p) => {
            let c = ExperimentConfig::load(p)?;
            let base = c.policies.iter().find_map(|e| match &e.spec {
                PolicySpec::AdaVaw { .. } => Some(e.spec.clone()),
                _ => None,
            });
            (c.generator, c.noise, base)
        }
        None => (
            GeneratorTemplate { bound: 1.0, kind: GeneratorKind::Constant { value: 0.0 } },
            NoiseConfig { sigma: 0.1, kind: Default::default() },
            None,
        ),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
    println!("n,k,seconds,ratio");
    let mut prev: Option<f64> = None;
    for &h in &n {
        let sim = simulate(&generator, noise.sigma, noise.kind, h, seed)?;
        let cfg: AdaVawConfig = match &base {
            Some(spec) => {
                let mut c = spec.ada_vaw_configs(h, noise.sigma, generator.bound, seed).remove(0);
                c.k = k;
                c
            }
            None => AdaVawConfig::new(k, h, noise.sigma, generator.bound).with_seed(seed),
        };
        let mut best = f64::INFINITY;
        for _ in 0..reps {
            let start = Instant::now();
            pool.install(|| run_policy(&cfg, &sim.y, Some(&sim.theta)))?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        let ratio = prev.map(|p| best / p);
        println!("{h},{k},{best:.6},{}", ratio.map(|r| format!("{r:.3}")).unwrap_or_default());
        prev = Some(best);
    }
    Ok(())
}
