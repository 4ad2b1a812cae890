//! Command-line front end: `gen`, `train`, `eval`, `verify`, `bench`.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::adapter::{Mode, DEFAULT_RING};
use crate::bench::{self, BenchConfig, BenchReport, DEFAULT_ITERATIONS};
use crate::dataset::SeriesDataset;
use crate::elm::{Activation, DEFAULT_NEURONS, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::eval::{evaluate_streams, save_trace, EvalConfig, EvalReport};
use crate::model_io::{load_model, save_model};
use crate::scaler::{DEFAULT_P_HIGH, DEFAULT_P_LOW};
use crate::synthgen::{self, GenConfig};
use crate::trainer::{train_offline, OfflineWeights, PruneConfig, TrainConfig, DEFAULT_W0};
use crate::verify::{run_battery, VerifyConfig};

/// Environment variable holding the default worker count for `eval`.
pub const THREADS_ENV: &str = "WRELM_THREADS";

/// Exit code for a verification battery that breached its tolerance.
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wrelm", version, about = "Weighted ring ELM: offline training and causal online adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic set-point-stepped logistic-map series.
    Gen(GenArgs),
    /// Train an offline model from a dataset CSV.
    Train(TrainArgs),
    /// Replay datasets causally through a model and report fit metrics.
    Eval(EvalArgs),
    /// Check trainer and adapter against the brute-force solver.
    Verify(VerifyArgs),
    /// Measure per-step latency.
    Bench(BenchArgs),
}

/// A `lo:hi` pair on the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span<T>(pub T, pub T);

impl<T: FromStr> FromStr for Span<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("bad value {v:?} in {s:?}"));
        Ok(Span(parse(a)?, parse(b)?))
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value = "2.8:3.9")]
    pub mu: Span<f64>,
    #[arg(long, default_value = "10:200")]
    pub dwell: Span<usize>,
    /// Observation noise standard deviation on targets.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub distractors: usize,
    /// Fraction of rows flagged invalid.
    #[arg(long, default_value_t = 0.0)]
    pub invalid_fraction: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NEURONS)]
    pub neurons: usize,
    #[arg(long, default_value_t = DEFAULT_W0)]
    pub w0: f64,
    /// Drop `before:after` rows around every set-point change.
    #[arg(long)]
    pub prune: Option<Span<usize>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = Activation::Pade)]
    pub activation: Activation,
    #[arg(long, default_value_t = DEFAULT_P_LOW)]
    pub p_low: f64,
    #[arg(long, default_value_t = DEFAULT_P_HIGH)]
    pub p_high: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// One or more dataset CSVs, each replayed as an independent stream.
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RING)]
    pub ring: usize,
    #[arg(long, conflicts_with = "static_mode")]
    pub adaptive: bool,
    /// Freeze the output weights at their offline values.
    #[arg(long = "static")]
    pub static_mode: bool,
    /// Trace CSV path; with several datasets `.N` is inserted before the extension.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, env = THREADS_ENV, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value = "50:500")]
    pub n0: Span<usize>,
    #[arg(long, default_value_t = 8)]
    pub m_max: usize,
    #[arg(long, default_value = "2:8")]
    pub z: Span<usize>,
    #[arg(long, default_value = "4:32")]
    pub neurons: Span<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// Perturb every adapted solution; the battery must then fail.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model file; a synthetic model is trained when omitted.
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NEURONS)]
    pub neurons: usize,
    #[arg(long, default_value_t = 6)]
    pub z: usize,
    #[arg(long, default_value_t = DEFAULT_RING)]
    pub ring: usize,
    /// Also run at this ring size for a paired comparison.
    #[arg(long)]
    pub compare_ring: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Parses `args` and runs the command, writing human-readable output to `out`.
/// Returns the process exit code for outcomes that are not errors.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(e.render().to_string()))?;
    dispatch(cli.command, out)
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = GenConfig {
        seed: a.seed,
        n_steps: a.steps,
        mu_min: a.mu.0,
        mu_max: a.mu.1,
        dwell_min: a.dwell.0,
        dwell_max: a.dwell.1,
        noise_sigma: a.noise,
        n_distractors: a.distractors,
        invalid_fraction: a.invalid_fraction,
    };
    let ds = synthgen::generate(&cfg)?;
    ds.save(&a.out)?;
    writeln!(
        out,
        "wrote {} rows ({} set-point changes, z = {}) to {}",
        ds.len(),
        ds.set_point_changes(),
        ds.z(),
        a.out.display()
    )?;
    Ok(0)
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let ds = SeriesDataset::load(&a.dataset)?;
    let cfg = TrainConfig {
        seed: a.seed,
        n_neurons: a.neurons,
        w0: OfflineWeights::Scalar(a.w0),
        p_low: a.p_low,
        p_high: a.p_high,
        activation: a.activation,
        prune: a.prune.map(|Span(n_before, n_after)| PruneConfig { n_before, n_after }),
        ..Default::default()
    };
    let model = train_offline(&ds, &cfg)?;
    save_model(&model, &a.out)?;
    let d = model.diagnostics();
    writeln!(out, "trained on {} of {} rows (z = {}, neurons = {})", d.train_rows, ds.len(), model.z(), model.n_neurons())?;
    writeln!(out, "training residual RMSE: {:.6e}", training_rmse(&model, &ds)?)?;
    writeln!(out, "gram rank {} of {}, condition {:.3e}", d.rank, model.n_neurons(), d.condition)?;
    writeln!(out, "saved model to {}", a.out.display())?;
    Ok(0)
}

/// RMSE of the offline prediction over the rows the model was trained on.
fn training_rmse(model: &crate::trainer::OfflineModel, ds: &SeriesDataset) -> Result<f64> {
    let used = match model.config().prune {
        Some(p) => crate::trainer::prune_transients(ds, p.n_before, p.n_after),
        None => ds.clone(),
    };
    let mut pred = Vec::new();
    let mut act = Vec::new();
    for r in used.records().iter().filter(|r| r.valid) {
        pred.push(model.predict_offline(&r.features)?);
        act.push(r.target);
    }
    Ok(crate::eval::rmse(&pred, &act))
}

fn trace_path(base: &std::path::Path, index: usize, total: usize) -> PathBuf {
    if total == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{index}"),
    };
    base.with_file_name(name)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let model = Arc::new(load_model(&a.model)?);
    let streams = a.datasets.iter().map(SeriesDataset::load).collect::<Result<Vec<_>>>()?;
    let cfg = EvalConfig {
        ring: a.ring,
        mode: if a.static_mode { Mode::Static } else { Mode::Adaptive },
        w1: None,
    };
    let reports = evaluate_streams(model, &streams, &cfg, a.threads)?;
    for (i, (path, r)) in a.datasets.iter().zip(&reports).enumerate() {
        print_eval(out, path, &cfg, r)?;
        if let Some(base) = &a.trace {
            let p = trace_path(base, i, reports.len());
            save_trace(&r.trace, &p)?;
            writeln!(out, "  trace: {}", p.display())?;
        }
    }
    Ok(0)
}

fn print_eval(out: &mut dyn Write, path: &std::path::Path, cfg: &EvalConfig, r: &EvalReport) -> Result<()> {
    let mode = match cfg.mode {
        Mode::Adaptive => "adaptive",
        Mode::Static => "static",
    };
    writeln!(out, "{} [{mode}, ring {}]", path.display(), cfg.ring)?;
    writeln!(out, "  rows scored: {}  outliers skipped: {}", r.scored, r.outliers)?;
    writeln!(out, "  R2: {:.6}", r.r2)?;
    writeln!(out, "  RMSE: {:.6e}", r.rmse)?;
    match r.steady_state_rmse {
        Some(v) => writeln!(out, "  steady-state RMSE: {v:.6e} over {} rows", r.steady_state_rows)?,
        None => writeln!(out, "  steady-state RMSE: n/a (no qualifying span)")?,
    }
    writeln!(out, "  step latency: median {:.2} us, p99 {:.2} us", r.latency.median_us, r.latency.p99_us)?;
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = VerifyConfig {
        instances: a.instances,
        seed: a.seed,
        n0: (a.n0.0, a.n0.1),
        m_max: a.m_max,
        z: (a.z.0, a.z.1),
        neurons: (a.neurons.0, a.neurons.1),
        tolerance: a.tolerance,
        inject_fault: a.inject_fault,
        ..Default::default()
    };
    if cfg.n0.0 == 0 || cfg.n0.0 > cfg.n0.1 || cfg.z.0 == 0 || cfg.z.0 > cfg.z.1 || cfg.neurons.0 == 0 || cfg.neurons.0 > cfg.neurons.1 {
        return Err(Error::arg("ranges must be lo:hi with 1 <= lo <= hi"));
    }
    if cfg.instances == 0 {
        writeln!(out, "warning: 0 instances requested; nothing verified")?;
        writeln!(out, "PASS (vacuous)")?;
        return Ok(0);
    }
    let report = run_battery(&cfg)?;
    writeln!(out, "instances: {}", report.results.len())?;
    writeln!(out, "worst offline relative error: {:.3e}", report.max_offline_err())?;
    writeln!(out, "worst online relative error:  {:.3e}", report.max_online_err())?;
    let failures = report.failures();
    for f in &failures {
        writeln!(
            out,
            "  instance {}: n0={} m={} z={} neurons={} cond={:.2e} offline={:.2e} online={:.2e}",
            f.index, f.n0, f.m, f.z, f.n_neurons, f.condition, f.offline_rel_err, f.online_rel_err
        )?;
    }
    if failures.is_empty() {
        writeln!(out, "PASS (tolerance {:.1e})", report.tolerance)?;
        Ok(0)
    } else {
        writeln!(out, "FAIL: {} of {} instances above tolerance {:.1e}", failures.len(), report.results.len(), report.tolerance)?;
        Ok(EXIT_VERIFY_FAILED)
    }
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let model = Arc::new(match &a.model {
        Some(p) => load_model(p)?,
        None => bench::synthetic_model(a.neurons, a.z, a.seed)?,
    });
    let mut rings = vec![a.ring];
    rings.extend(a.compare_ring);
    for ring in rings {
        let cfg = BenchConfig { iterations: a.iterations, ring, seed: a.seed, ..Default::default() };
        let r = bench::run(Arc::clone(&model), &cfg)?;
        print_bench(out, &r)?;
    }
    Ok(0)
}

fn print_bench(out: &mut dyn Write, r: &BenchReport) -> Result<()> {
    writeln!(out, "neurons {} z {} ring {} over {} iterations", r.n_neurons, r.z, r.ring, r.iterations)?;
    for (name, s) in [("total", r.total), ("push", r.push), ("adapt", r.adapt), ("predict", r.predict)] {
        writeln!(out, "  {name:<8} median {:>9.2} us  p99 {:>9.2} us", s.median_us, s.p99_us)?;
    }
    writeln!(out, "  phases cover {:.1}% of wall time", 100.0 * r.phase_coverage)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_parsing() {
        assert_eq!("2.8:3.9".parse::<Span<f64>>().unwrap(), Span(2.8, 3.9));
        assert_eq!("6:9".parse::<Span<usize>>().unwrap(), Span(6, 9));
        assert!("6".parse::<Span<usize>>().is_err());
        assert!("a:9".parse::<Span<usize>>().is_err());
    }

    #[test]
    fn trace_paths() {
        let p = std::path::Path::new("/tmp/t.csv");
        assert_eq!(trace_path(p, 0, 1), PathBuf::from("/tmp/t.csv"));
        assert_eq!(trace_path(p, 1, 2), PathBuf::from("/tmp/t.1.csv"));
    }

    #[test]
    fn bad_flags_are_validation_errors() {
        let mut sink = Vec::new();
        let e = run(["wrelm", "gen", "--mu", "4.5:5", "--out", "/nonexistent/x.csv"], &mut sink).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = run(["wrelm", "frobnicate"], &mut sink).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn vacuous_verify() {
        let mut sink = Vec::new();
        assert_eq!(run(["wrelm", "verify", "--instances", "0"], &mut sink).unwrap(), 0);
        assert!(String::from_utf8(sink).unwrap().contains("warning"));
    }
}
