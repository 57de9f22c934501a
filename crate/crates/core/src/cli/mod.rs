//! `sepode simulate | fit | benchmark`.
//!
//! Exit codes: 0 on success (non-convergence included), 1 on runtime
//! failure, 2 on usage or configuration errors.

mod config;
pub mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::harness::{
    child_rng, make_nl_guess, make_prior_guess, median, run_prior_sweep, squared_errors, summarize,
    ExperimentConfig, McSummary, ReplicationOutcome, Stream,
};
use crate::model::{EstimationResult, ObservationSet, ParamSplit, SeparableModel};
use crate::models::{generate_observations, integrate, sample_times, BenchmarkKind};
use crate::optimize::{default_smoother, fit_nls_with_smoother, fit_sls_with_smoother, smoother_initial_values};

pub use config::{BenchmarkGrid, Config};
use plot::Series;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "sepode", version, about = "Separable least squares for ODE parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (simulate, fit) or directory (benchmark).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long, env = "SEPODE_THREADS")]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Sls,
    Nls,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a noisy observation CSV for one benchmark.
    Simulate(Common),
    /// Fit a benchmark model to an observation CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Observation CSV with header `t,<state names>`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Run the Monte-Carlo comparison and write tables and figures.
    Benchmark(Common),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Benchmark(c) => c,
        Command::Fit { common, .. } => common,
    };
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let threads = match common.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime)?;
    pool.install(|| match &cli.command {
        Command::Simulate(c) => cmd_simulate(&cfg, c.out.as_deref()),
        Command::Fit { common, data, method } => cmd_fit(&cfg, data, *method, common.out.as_deref()),
        Command::Benchmark(c) => cmd_benchmark(&cfg, c.out.as_deref().unwrap_or(Path::new("benchmark_out")), threads),
    })
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(runtime),
    }
}

/// Observations for the first replication stream of `seed`.
pub fn simulate_observations(cfg: &Config) -> Result<(SeparableModel, ObservationSet), CliError> {
    let kind = cfg.require_benchmark()?;
    let spec = kind.spec();
    let n = cfg.n.unwrap_or(spec.sample_sizes[0]);
    if n < ObservationSet::MIN_SAMPLES {
        return Err(CliError::Usage(format!("n = {n} is too small")));
    }
    let times = sample_times(spec.model.horizon(), n);
    let traj = integrate(&spec.model, &spec.theta_true, &times).map_err(runtime)?;
    let mut rng = child_rng(cfg.seed, 0, Stream::Noise);
    let obs = generate_observations(&times, &traj, cfg.snr().unwrap_or(f64::INFINITY), &mut rng).map_err(runtime)?;
    Ok((spec.model, obs))
}

pub fn observations_csv(model: &SeparableModel, obs: &ObservationSet) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(model.state_names().iter().cloned());
    w.write_record(&header).map_err(runtime)?;
    for (i, t) in obs.times().iter().enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend((0..obs.d()).map(|j| format!("{:.16e}", obs.values()[(i, j)])));
        w.write_record(&row).map_err(runtime)?;
    }
    w.into_inner().map_err(runtime)
}

fn cmd_simulate(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let (model, obs) = simulate_observations(cfg)?;
    write_output(out, &observations_csv(&model, &obs)?)
}

pub fn read_observations(model: &SeparableModel, path: &Path) -> Result<ObservationSet, CliError> {
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(|s| s.trim().to_string()).collect();
    let mut expected = vec!["t".to_string()];
    expected.extend(model.state_names().iter().cloned());
    if header != expected {
        return Err(bad(format!("header {header:?} does not match {expected:?}")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        times.push(nums[0]);
        values.extend_from_slice(&nums[1..]);
    }
    let d = model.d();
    let y = DMatrix::from_row_slice(times.len(), d, &values);
    ObservationSet::new(times, y).map_err(|e| bad(e.to_string()))
}

fn named(names: &[String], values: &[f64]) -> Value {
    let map: serde_json::Map<String, Value> = names.iter().cloned().zip(values.iter().map(|v| json!(v))).collect();
    Value::Object(map)
}

fn flat(p: &ParamSplit) -> Vec<f64> {
    p.xi.iter().chain(&p.theta_nl).chain(&p.theta_l).copied().collect()
}

fn result_json(model: &SeparableModel, r: &EstimationResult, nls_init: Option<&ParamSplit>) -> Value {
    let names = model.all_param_names();
    let mut v = json!({
        "benchmark": model.name(),
        "method": r.method.as_str(),
        "estimates": named(&names, &flat(&r.estimate)),
        "loss": r.loss,
        "iterations": r.iterations,
        "wall_time": r.wall_time,
        "converged": r.converged,
        "diagnostics": r.diagnostics,
    });
    if let Some(init) = nls_init {
        v["initial_guess"] = named(&names, &flat(init));
    }
    v
}

fn cmd_fit(cfg: &Config, data: &Path, method: MethodArg, out: Option<&Path>) -> Result<(), CliError> {
    let kind = cfg.require_benchmark()?;
    let spec = kind.spec();
    let model = &spec.model;
    let obs = read_observations(model, data)?;
    if obs.times().last().copied().unwrap_or(0.0) > model.horizon() || obs.times()[0] < 0.0 {
        return Err(CliError::Usage(format!(
            "sample times must lie in [0, {}]",
            model.horizon()
        )));
    }
    let fit = default_smoother(model, &obs).map_err(runtime)?;
    let theta_nl_init = make_nl_guess(model.bounds_nl(), &mut child_rng(cfg.seed, 0, Stream::NonlinearGuess)).map_err(runtime)?;
    let mut results = Vec::new();
    if matches!(method, MethodArg::Sls | MethodArg::Both) {
        let r = fit_sls_with_smoother(model, &fit, &theta_nl_init, &cfg.optimizer).map_err(runtime)?;
        results.push(result_json(model, &r, None));
    }
    if matches!(method, MethodArg::Nls | MethodArg::Both) {
        let theta_l = make_prior_guess(
            &spec.theta_true.theta_l,
            cfg.prior_cv,
            model.positivity_l(),
            &mut child_rng(cfg.seed, 0, Stream::LinearGuess),
        );
        let init = ParamSplit::new(theta_nl_init.clone(), theta_l, smoother_initial_values(&fit));
        let r = fit_nls_with_smoother(model, &fit, &init, &cfg.optimizer).map_err(runtime)?;
        results.push(result_json(model, &r, Some(&init)));
    }
    let payload = match method {
        MethodArg::Both => Value::Array(results),
        _ => results.pop().expect("one result"),
    };
    let mut text = serde_json::to_string_pretty(&payload).map_err(runtime)?;
    text.push('\n');
    write_output(out, text.as_bytes())
}

/// A benchmark cell: one model, sample size, noise level and prior level.
pub struct Cell {
    pub kind: BenchmarkKind,
    pub n: usize,
    pub snr: f64,
    pub prior: f64,
    pub outcome: Result<McSummary, String>,
}

fn fmt_snr(s: f64) -> String {
    format!("{s}")
}

/// Runs every cell of the grid, one prior sweep per (model, n, snr).
pub fn run_grid(cfg: &Config) -> Result<Vec<Cell>, CliError> {
    let g = &cfg.benchmark_grid;
    let mut cells = Vec::new();
    for &kind in &g.models {
        let spec = kind.spec();
        let sizes = g.sample_sizes.clone().unwrap_or_else(|| spec.sample_sizes.to_vec());
        let priors = g.priors.clone().unwrap_or_else(|| spec.prior_qualities.as_array().to_vec());
        for &n in &sizes {
            for &snr in &g.snr_levels {
                let mut exp = ExperimentConfig::new(kind, n, Some(snr), priors[0]);
                exp.mc_reps = g.mc_reps;
                exp.master_seed = cfg.seed;
                exp.optimizer = cfg.optimizer.clone();
                exp.exclude_nonconverged = g.exclude_nonconverged;
                exp.aggregation = g.aggregation;
                exp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                eprintln!("running {kind} n={n} snr={snr} priors={priors:?} reps={}", g.mc_reps);
                match run_prior_sweep(&exp, &priors) {
                    Ok(sweeps) => {
                        for (&prior, records) in priors.iter().zip(sweeps) {
                            let mut c = exp.clone();
                            c.prior_cv = prior;
                            let outcome = summarize(&records, &c).map_err(|e| e.to_string());
                            cells.push(Cell { kind, n, snr, prior, outcome });
                        }
                    }
                    Err(e) => {
                        for &prior in &priors {
                            cells.push(Cell {
                                kind,
                                n,
                                snr,
                                prior,
                                outcome: Err(e.to_string()),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn sanitize(reason: &str) -> String {
    reason.replace([',', '\n', '"'], " ")
}

pub fn ratio_table(cells: &[Cell], linear: bool) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "n", "snr", "prior", "ratio", "nls_excluded", "sls_excluded"])
        .map_err(runtime)?;
    for c in cells {
        let (ratio, nls_ex, sls_ex) = match &c.outcome {
            Ok(s) => {
                let r = if linear { s.linear_ratio } else { s.nonlinear_ratio };
                let ratio = match r {
                    Some(v) => format!("{v}"),
                    None if !linear && c.kind.spec().model.p_nl() == 0 => "NA:no nonlinear parameters".into(),
                    None => "NA:zero SLS error".into(),
                };
                (ratio, (s.mc_reps - s.nls.included).to_string(), (s.mc_reps - s.sls.included).to_string())
            }
            Err(e) => (format!("NA:{}", sanitize(e)), "NA".into(), "NA".into()),
        };
        w.write_record([c.kind.as_str().to_string(), c.n.to_string(), fmt_snr(c.snr), format!("{}", c.prior), ratio, nls_ex, sls_ex])
            .map_err(runtime)?;
    }
    w.into_inner().map_err(runtime)
}

pub fn losses_table(cells: &[Cell]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model", "n", "snr", "prior", "rep", "method", "status", "converged", "loss", "iterations",
        "termination", "sq_err_linear", "sq_err_nonlinear", "estimate",
    ])
    .map_err(runtime)?;
    for c in cells {
        let Ok(s) = &c.outcome else { continue };
        let truth = c.kind.spec().theta_true;
        let base = [c.kind.as_str().to_string(), c.n.to_string(), fmt_snr(c.snr), format!("{}", c.prior)];
        for rec in &s.records {
            match rec {
                ReplicationOutcome::Skipped { rep_index, reason } => {
                    let mut row = base.to_vec();
                    row.extend([rep_index.to_string(), "both".into(), format!("skipped:{}", sanitize(reason))]);
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    w.write_record(&row).map_err(runtime)?;
                }
                ReplicationOutcome::Completed(r) => {
                    for est in [&r.nls, &r.sls] {
                        let se_l: f64 = squared_errors(&est.estimate.theta_l, &truth.theta_l).iter().fold(0.0, |a, b| a + b);
                        let se_nl: f64 = squared_errors(&est.estimate.theta_nl, &truth.theta_nl).iter().fold(0.0, |a, b| a + b);
                        let mut row = base.to_vec();
                        row.extend([
                            r.rep_index.to_string(),
                            est.method.as_str().into(),
                            "ok".into(),
                            est.converged.to_string(),
                            format!("{}", est.loss),
                            est.iterations.to_string(),
                            format!("{:?}", est.diagnostics.termination).to_lowercase(),
                            format!("{se_l}"),
                            format!("{se_nl}"),
                            flat(&est.estimate).iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
                        ]);
                        w.write_record(&row).map_err(runtime)?;
                    }
                }
            }
        }
    }
    w.into_inner().map_err(runtime)
}

/// Wall times live apart from `losses.csv` so that the other tables are
/// reproducible byte for byte.
pub fn times_table(cells: &[Cell]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "n", "snr", "prior", "rep", "method", "wall_time"]).map_err(runtime)?;
    for c in cells {
        let Ok(s) = &c.outcome else { continue };
        for r in s.records.iter().filter_map(|r| r.record()) {
            for est in [&r.nls, &r.sls] {
                w.write_record([
                    c.kind.as_str().to_string(),
                    c.n.to_string(),
                    fmt_snr(c.snr),
                    format!("{}", c.prior),
                    r.rep_index.to_string(),
                    est.method.as_str().into(),
                    format!("{}", est.wall_time),
                ])
                .map_err(runtime)?;
            }
        }
    }
    w.into_inner().map_err(runtime)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<String>) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
    written.push(name.to_string());
    Ok(())
}

fn figures(cells: &[Cell], dir: &Path, written: &mut Vec<String>) -> Result<(), CliError> {
    let mut kinds: Vec<BenchmarkKind> = cells.iter().map(|c| c.kind).collect();
    kinds.dedup();
    let mut loss_groups: Vec<(String, Vec<f64>)> = Vec::new();
    let mut time_groups: Vec<(String, Vec<f64>)> = Vec::new();
    for kind in kinds {
        let mine: Vec<&Cell> = cells.iter().filter(|c| c.kind == kind).collect();
        // MSE of the linear block against prior level, one line per method and setting.
        let mut lines: BTreeMap<(usize, String, &str), Vec<(f64, f64)>> = BTreeMap::new();
        let mut dat = String::from("# method n snr prior mse_linear\n");
        for c in &mine {
            let Ok(s) = &c.outcome else { continue };
            for (label, m) in [("nls", &s.nls), ("sls", &s.sls)] {
                lines.entry((c.n, fmt_snr(c.snr), label)).or_default().push((c.prior, m.block_mse_linear));
                dat.push_str(&format!("{label} {} {} {} {}\n", c.n, fmt_snr(c.snr), c.prior, m.block_mse_linear));
            }
        }
        let series: Vec<Series> = lines
            .into_iter()
            .map(|((n, snr, m), points)| Series {
                label: format!("{m} n={n} snr={snr}"),
                points,
            })
            .collect();
        let svg = plot::line_chart(&format!("{kind}: linear-parameter MSE"), "prior CV", "MSE (log scale)", true, &series);
        write_file(dir, &format!("fig1_mse_{kind}.svg"), svg.as_bytes(), written)?;
        write_file(dir, &format!("fig1_mse_{kind}.dat"), dat.as_bytes(), written)?;

        // Final losses, NLS against SLS, colored by prior level.
        let mut by_prior: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        let mut dat = String::from("# n snr prior rep loss_sls loss_nls\n");
        for c in &mine {
            let Ok(s) = &c.outcome else { continue };
            for r in s.records.iter().filter_map(|r| r.record()) {
                by_prior.entry(format!("prior {}", c.prior)).or_default().push((r.sls.loss, r.nls.loss));
                dat.push_str(&format!("{} {} {} {} {} {}\n", c.n, fmt_snr(c.snr), c.prior, r.rep_index, r.sls.loss, r.nls.loss));
            }
            let tag = format!("{kind} n={} s={} p={}", c.n, fmt_snr(c.snr), c.prior);
            loss_groups.push((format!("{tag} nls"), s.nls.losses.clone()));
            loss_groups.push((format!("{tag} sls"), s.sls.losses.clone()));
            time_groups.push((format!("{tag} nls"), s.nls.wall_times.clone()));
            time_groups.push((format!("{tag} sls"), s.sls.wall_times.clone()));
        }
        let series: Vec<Series> = by_prior.into_iter().map(|(label, points)| Series { label, points }).collect();
        let svg = plot::scatter(&format!("{kind}: final losses"), "SLS loss", "NLS loss", &series, true);
        write_file(dir, &format!("fig2_loss_{kind}.svg"), svg.as_bytes(), written)?;
        write_file(dir, &format!("fig2_loss_{kind}.dat"), dat.as_bytes(), written)?;
    }
    let dat_of = |groups: &[(String, Vec<f64>)]| {
        let mut s = String::from("# group min q1 median q3 max\n");
        for (label, v) in groups {
            if let Some(f) = plot::five_numbers(v) {
                s.push_str(&format!("\"{label}\" {} {} {} {} {}\n", f[0], f[1], f[2], f[3], f[4]));
            }
        }
        s
    };
    let svg = plot::boxplot("Final losses", "loss (log scale)", true, &loss_groups);
    write_file(dir, "fig3_losses.svg", svg.as_bytes(), written)?;
    write_file(dir, "fig3_losses.dat", dat_of(&loss_groups).as_bytes(), written)?;
    let svg = plot::boxplot("Optimization wall time", "seconds (log scale)", true, &time_groups);
    write_file(dir, "fig3_times.svg", svg.as_bytes(), written)?;
    write_file(dir, "fig3_times.dat", dat_of(&time_groups).as_bytes(), written)?;
    Ok(())
}

fn cmd_benchmark(cfg: &Config, dir: &Path, threads: usize) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let cells = run_grid(cfg)?;
    if cells.iter().all(|c| c.outcome.is_err()) {
        let reasons: Vec<&str> = cells.iter().filter_map(|c| c.outcome.as_ref().err()).map(String::as_str).collect();
        return Err(CliError::Runtime(format!("every cell failed: {}", reasons.join("; "))));
    }
    let mut written = Vec::new();
    write_file(dir, "mse_ratios_linear.csv", &ratio_table(&cells, true)?, &mut written)?;
    write_file(dir, "mse_ratios_nonlinear.csv", &ratio_table(&cells, false)?, &mut written)?;
    write_file(dir, "losses.csv", &losses_table(&cells)?, &mut written)?;
    write_file(dir, "times.csv", &times_table(&cells)?, &mut written)?;
    figures(&cells, dir, &mut written)?;

    let medians: Vec<Value> = cells
        .iter()
        .filter_map(|c| {
            let s = c.outcome.as_ref().ok()?;
            Some(json!({
                "model": c.kind.as_str(), "n": c.n, "snr": c.snr, "prior": c.prior,
                "median_wall_time_nls": median(&s.nls.wall_times),
                "median_wall_time_sls": median(&s.sls.wall_times),
            }))
        })
        .collect();
    let models: BTreeMap<&str, Vec<String>> = cfg
        .benchmark_grid
        .models
        .iter()
        .map(|k| (k.as_str(), k.spec().model.all_param_names()))
        .collect();
    let mut manifest = cfg.clone();
    manifest.manifest = Some(json!({
        "version": env!("CARGO_PKG_VERSION"),
        "threads": threads,
        "files": written,
        "estimate_columns": models,
        "timing": medians,
    }));
    let mut text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text).map_err(runtime)?;
    Ok(())
}
