//! Per-step latency of push + adapt + predict.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::adapter::OnlinePredictor;
use crate::error::{Error, Result};
use crate::eval::{latency_summary, LatencySummary};
use crate::rng::SeededRng;
use crate::synthgen::{self, GenConfig};
use crate::trainer::{train_offline, OfflineModel, TrainConfig};

pub const DEFAULT_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub iterations: usize,
    pub ring: usize,
    /// Untimed steps run first so the ring is full when timing starts.
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, ring: 8, warmup: 1000, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    pub ring: usize,
    pub n_neurons: usize,
    pub z: usize,
    /// Wall clock around the whole step.
    pub total: LatencySummary,
    pub push: LatencySummary,
    pub adapt: LatencySummary,
    pub predict: LatencySummary,
    /// Summed phase time over summed wall time.
    pub phase_coverage: f64,
}

/// Trains a small model on a generated stream for benchmarking when no model
/// file is supplied.
pub fn synthetic_model(n_neurons: usize, z: usize, seed: u64) -> Result<OfflineModel> {
    if z < 2 {
        return Err(Error::arg("benchmark model needs z >= 2"));
    }
    let ds = synthgen::generate(&GenConfig {
        seed,
        n_steps: 2000,
        mu_min: 2.8,
        mu_max: 3.4,
        noise_sigma: 0.01,
        n_distractors: z - 2,
        ..Default::default()
    })?;
    train_offline(&ds, &TrainConfig { n_neurons, seed, ..Default::default() })
}

pub fn run(model: Arc<OfflineModel>, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.iterations == 0 {
        return Err(Error::arg("iterations must be >= 1"));
    }
    let z = model.z();
    let n_neurons = model.n_neurons();
    let mut rng = SeededRng::new(cfg.seed);
    let mut predictor = OnlinePredictor::new(model, cfg.ring)?;
    // random inputs inside the scaler's range exercise the same arithmetic as real rows
    let bounds = predictor.model().feature_scaler().bounds().to_vec();
    let next_row = |rng: &mut SeededRng| -> Vec<f64> {
        bounds.iter().map(|b| b.lo + (b.hi - b.lo) * rng.uniform()).collect()
    };

    let mut x = next_row(&mut rng);
    for _ in 0..cfg.warmup {
        let x_next = next_row(&mut rng);
        predictor.step(&x, rng.uniform(), &x_next)?;
        x = x_next;
    }

    let n = cfg.iterations;
    let (mut total, mut push, mut adapt, mut predict) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut wall_sum = Duration::ZERO;
    let mut phase_sum = Duration::ZERO;
    for _ in 0..n {
        let x_next = next_row(&mut rng);
        let t = rng.uniform();
        let start = Instant::now();
        let out = predictor.step(&x, t, &x_next)?;
        let wall = start.elapsed();
        std::hint::black_box(out.prediction);
        total.push(wall);
        push.push(out.timings.push);
        adapt.push(out.timings.adapt);
        predict.push(out.timings.predict);
        wall_sum += wall;
        phase_sum += out.timings.total();
        x = x_next;
    }
    let phase_coverage = if wall_sum.is_zero() { 1.0 } else { phase_sum.as_secs_f64() / wall_sum.as_secs_f64() };
    Ok(BenchReport {
        iterations: n,
        ring: cfg.ring,
        n_neurons,
        z,
        total: latency_summary(&mut total),
        push: latency_summary(&mut push),
        adapt: latency_summary(&mut adapt),
        predict: latency_summary(&mut predict),
        phase_coverage,
    })
}
