//! Causal streaming evaluation and fit metrics.
//!
//! Replay order for record `k` (features `x_k`, target `t_k` = value at k+1):
//!
//! 1. predict `t_k` from `x_k` with the current `β₁`,
//! 2. read `t_k`,
//! 3. push `(x_k, t_k)` and adapt (adaptive mode, valid rows only).
//!
//! Rows flagged invalid are neither pushed nor scored and do not appear in
//! the trace.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::adapter::{Mode, OnlinePredictor, OnlineWeights};
use crate::dataset::SeriesDataset;
use crate::error::{check_len, Error, Result};
use crate::trainer::OfflineModel;

/// Minimum run length (rows) of an unchanged set point to count as steady.
pub const STEADY_MIN_RUN: usize = 50;
/// Rows discarded at the start of each steady run.
pub const STEADY_SKIP: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub ring: usize,
    pub mode: Mode,
    /// Per-slot online weights; identity when `None`.
    pub w1: Option<Vec<f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ring: crate::adapter::DEFAULT_RING, mode: Mode::Adaptive, w1: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub predicted: f64,
    pub actual: f64,
    pub error: f64,
    /// 2-norm of the `β₁` used for this prediction.
    pub beta1_norm: f64,
    /// Push + adapt time spent after the target was read, in microseconds.
    pub adapt_us: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Predicted,
    TargetRead,
}

/// One entry of the replay log; `seq` is a strictly increasing logical clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub step: u64,
    pub kind: EventKind,
    pub elapsed_ns: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LatencySummary {
    pub median_us: f64,
    pub p99_us: f64,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub r2: f64,
    pub rmse: f64,
    /// `None` when no steady span qualifies.
    pub steady_state_rmse: Option<f64>,
    pub steady_state_rows: usize,
    pub scored: usize,
    pub outliers: usize,
    pub trace: Vec<TraceRow>,
    pub events: Vec<Event>,
    /// Per-step predict + push + adapt latency.
    pub latency: LatencySummary,
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), actual.len());
    if actual.is_empty() {
        return 0.0;
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p).powi(2)).sum();
    (sse / actual.len() as f64).sqrt()
}

/// `1 − SS_res / SS_tot`, with `SS_tot` about the mean of `actual`.
pub fn r_squared(predicted: &[f64], actual: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), actual.len());
    if actual.is_empty() {
        return f64::NAN;
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Marks rows inside steady spans: runs of one set point lasting at least
/// [`STEADY_MIN_RUN`] rows, minus the first [`STEADY_SKIP`] rows of the run.
pub fn steady_state_mask(set_points: &[u64]) -> Vec<bool> {
    let mut mask = vec![false; set_points.len()];
    let mut start = 0;
    while start < set_points.len() {
        let mut end = start + 1;
        while end < set_points.len() && set_points[end] == set_points[start] {
            end += 1;
        }
        if end - start >= STEADY_MIN_RUN {
            mask[start + STEADY_SKIP..end].iter_mut().for_each(|m| *m = true);
        }
        start = end;
    }
    mask
}

/// Counts steps whose target was read before (or without) its prediction.
pub fn audit_causality(events: &[Event]) -> usize {
    use std::collections::HashMap;
    let mut predicted_at: HashMap<u64, u64> = HashMap::new();
    let mut violations = 0;
    let mut last_seq = None;
    for e in events {
        if last_seq.is_some_and(|s| e.seq <= s) {
            violations += 1;
        }
        last_seq = Some(e.seq);
        match e.kind {
            EventKind::Predicted => {
                predicted_at.insert(e.step, e.seq);
            }
            EventKind::TargetRead => match predicted_at.get(&e.step) {
                Some(&p) if p < e.seq => {}
                _ => violations += 1,
            },
        }
    }
    violations
}

pub fn evaluate(model: Arc<OfflineModel>, ds: &SeriesDataset, cfg: &EvalConfig) -> Result<EvalReport> {
    check_len(model.z(), ds.z())?;
    let w1 = match &cfg.w1 {
        Some(slots) => OnlineWeights::per_slot(slots.clone())?,
        None => OnlineWeights::identity(cfg.ring),
    };
    let mut predictor = OnlinePredictor::with_weights(model, w1, cfg.ring)?.with_mode(cfg.mode);
    let origin = Instant::now();
    let mut seq = 0u64;
    let mut events = Vec::with_capacity(2 * ds.len());
    let mut log = |step: u64, kind: EventKind| {
        events.push(Event { seq, step, kind, elapsed_ns: origin.elapsed().as_nanos() as u64 });
        seq += 1;
    };

    let mut trace = Vec::with_capacity(ds.len());
    let mut step_times = Vec::with_capacity(ds.len());
    let mut steady_pred = Vec::new();
    let mut steady_act = Vec::new();
    let mask = steady_state_mask(&ds.records().iter().map(|r| r.set_point).collect::<Vec<_>>());
    let mut outliers = 0;

    for (k, rec) in ds.records().iter().enumerate() {
        if !rec.valid {
            outliers += 1;
            continue;
        }
        let t0 = Instant::now();
        let beta1_norm = predictor.state().beta1().norm();
        let predicted = predictor.predict(&rec.features)?;
        let predict_time = t0.elapsed();
        log(rec.step, EventKind::Predicted);

        let actual = rec.target;
        log(rec.step, EventKind::TargetRead);
        let timings = predictor.observe(&rec.features, actual)?;
        let update = timings.push + timings.adapt;

        if mask[k] {
            steady_pred.push(predicted);
            steady_act.push(actual);
        }
        step_times.push(predict_time + update);
        trace.push(TraceRow {
            step: rec.step,
            predicted,
            actual,
            error: actual - predicted,
            beta1_norm,
            adapt_us: update.as_secs_f64() * 1e6,
        });
    }

    if trace.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predicted: Vec<f64> = trace.iter().map(|t| t.predicted).collect();
    let actual: Vec<f64> = trace.iter().map(|t| t.actual).collect();
    if predicted.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite prediction".into()));
    }
    Ok(EvalReport {
        r2: r_squared(&predicted, &actual),
        rmse: rmse(&predicted, &actual),
        steady_state_rmse: (!steady_act.is_empty()).then(|| rmse(&steady_pred, &steady_act)),
        steady_state_rows: steady_act.len(),
        scored: trace.len(),
        outliers,
        trace,
        events,
        latency: latency_summary(&mut step_times),
    })
}

/// Replays several independent streams over one shared model, `threads` at a time.
pub fn evaluate_streams(
    model: Arc<OfflineModel>,
    streams: &[SeriesDataset],
    cfg: &EvalConfig,
    threads: usize,
) -> Result<Vec<EvalReport>> {
    let threads = threads.max(1);
    let mut out: Vec<Option<Result<EvalReport>>> = (0..streams.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in streams.chunks(threads).enumerate() {
        let results: Vec<Result<EvalReport>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|ds| {
                    let model = Arc::clone(&model);
                    s.spawn(move || evaluate(model, ds, cfg))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            out[chunk_idx * threads + i] = Some(r);
        }
    }
    out.into_iter().map(|r| r.expect("every stream evaluated")).collect()
}

pub fn latency_summary(samples: &mut [Duration]) -> LatencySummary {
    if samples.is_empty() {
        return LatencySummary::default();
    }
    samples.sort_unstable();
    let pick = |q: f64| {
        let idx = ((samples.len() - 1) as f64 * q).round() as usize;
        samples[idx].as_secs_f64() * 1e6
    };
    LatencySummary { median_us: pick(0.5), p99_us: pick(0.99) }
}

/// Trace CSV: `step,predicted,actual,error,beta1_norm,adapt_us`.
pub fn write_trace<W: Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "step,predicted,actual,error,beta1_norm,adapt_us")?;
    for t in trace {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.3}",
            t.step, t.predicted, t.actual, t.error, t.beta1_norm, t.adapt_us
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, std::fs::File::create(path)?)
}
