//! Online correction of the offline solution from a ring of recent pairs.
//!
//! For the `m` pairs currently in the ring (hidden rows `H₁`, scaled
//! targets `T₁`, slot weights `W₁`):
//!
//! ```text
//! A  = P₀ H₁ᵀ            (Ñ × m)
//! B  = H₁ A              (m × m)
//! β₁ = β₀ + A (W₁⁻¹ + B)⁻¹ (T₁ − H₁ β₀)
//! ```
//!
//! Every call starts again from the frozen `P₀`/`β₀`; no corrected
//! covariance is carried between steps, so `β₁` depends only on the model,
//! the ring contents and `W₁`.
//!
//! Each ring entry caches its hidden row, its column `P₀ h` of `A`, and
//! `h · β₀`, all computed once at insertion. An update then costs
//! `O(m² Ñ)`.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::elm;
use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{self, SolveRoute};
use crate::trainer::OfflineModel;

pub const DEFAULT_RING: usize = 8;

#[derive(Clone, Debug)]
struct Entry {
    x_scaled: Vec<f64>,
    t_scaled: f64,
    hidden: DVector<f64>,
    p0_h: DVector<f64>,
    h_beta0: f64,
}

/// FIFO of up to `capacity` (features at step k, target observed at k+1) pairs.
#[derive(Clone, Debug)]
pub struct RingBuffer {
    capacity: usize,
    entries: VecDeque<Entry>,
    model_fingerprint: Option<u64>,
}

impl RingBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::arg("ring capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
            model_fingerprint: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.model_fingerprint = None;
    }

    /// Scales the pair with the model's frozen scalers, caches its hidden row
    /// and appends it, evicting the oldest pair when full. On error the ring
    /// is left unchanged.
    pub fn push_pair(&mut self, model: &OfflineModel, x_raw: &[f64], t_next_raw: f64) -> Result<()> {
        self.push_pair_with_hidden(model, x_raw, t_next_raw, None)
    }

    pub(crate) fn push_pair_with_hidden(
        &mut self,
        model: &OfflineModel,
        x_raw: &[f64],
        t_next_raw: f64,
        hidden: Option<DVector<f64>>,
    ) -> Result<()> {
        check_len(model.z(), x_raw.len())?;
        check_finite(x_raw, "feature row")?;
        check_finite(&[t_next_raw], "target")?;
        if let Some(fp) = self.model_fingerprint {
            if fp != model.fingerprint() && !self.entries.is_empty() {
                return Err(Error::arg("ring holds pairs cached against a different model"));
            }
        }
        let x_scaled = model.feature_scaler().apply(x_raw)?;
        let hidden = match hidden {
            Some(h) => h,
            None => elm::hidden_row(model.input_weights(), &x_scaled, model.activation())?,
        };
        let p0_h = model.p0() * &hidden;
        let h_beta0 = hidden.dot(model.beta0());
        self.model_fingerprint = Some(model.fingerprint());
        self.entries.push_back(Entry {
            x_scaled,
            t_scaled: model.scale_target(t_next_raw),
            hidden,
            p0_h,
            h_beta0,
        });
        if self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Scaled feature rows, oldest first.
    pub fn scaled_inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(|e| e.x_scaled.as_slice())
    }

    /// Scaled targets, oldest first.
    pub fn scaled_targets(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.t_scaled)
    }

    /// Cached hidden rows, oldest first.
    pub fn hidden_rows(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.entries.iter().map(|e| &e.hidden)
    }

    /// `H₁` as an `m × Ñ` matrix.
    pub fn hidden_matrix(&self) -> DMatrix<f64> {
        let n = self.entries.front().map_or(0, |e| e.hidden.len());
        DMatrix::from_fn(self.len(), n, |k, i| self.entries[k].hidden[i])
    }
}

/// Positive per-slot online weights (the diagonal of `W₁`).
///
/// Slots are aligned to the newest end of the ring: with `m < r` pairs,
/// the pairs use the last `m` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineWeights {
    slots: Vec<f64>,
}

impl OnlineWeights {
    pub fn identity(capacity: usize) -> Self {
        Self { slots: vec![1.0; capacity] }
    }

    pub fn uniform(capacity: usize, w: f64) -> Result<Self> {
        Self::per_slot(vec![w; capacity])
    }

    pub fn per_slot(slots: Vec<f64>) -> Result<Self> {
        if slots.is_empty() || slots.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::arg("online weights must be non-empty, finite and > 0"));
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::per_slot(self.slots.iter().map(|w| w * c).collect())
    }

    fn for_len(&self, m: usize) -> Result<&[f64]> {
        if m > self.slots.len() {
            return Err(Error::DimensionMismatch { expected: self.slots.len(), actual: m });
        }
        Ok(&self.slots[self.slots.len() - m..])
    }
}

/// Output weights after one adaptation.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedState {
    beta1: DVector<f64>,
    ring_len: usize,
    model_fingerprint: u64,
    route: Option<SolveRoute>,
}

impl AdaptedState {
    /// The unadapted state, `β₁ = β₀`.
    pub fn offline(model: &OfflineModel) -> Self {
        Self {
            beta1: model.beta0().clone(),
            ring_len: 0,
            model_fingerprint: model.fingerprint(),
            route: None,
        }
    }

    pub fn beta1(&self) -> &DVector<f64> {
        &self.beta1
    }

    pub fn ring_len(&self) -> usize {
        self.ring_len
    }

    /// Inner-solve path taken, `None` for an empty ring.
    pub fn route(&self) -> Option<SolveRoute> {
        self.route
    }
}

/// One-shot weighted correction of `β₀` from the current ring contents.
pub fn adapt(model: &OfflineModel, ring: &RingBuffer, w1: &OnlineWeights) -> Result<AdaptedState> {
    let m = ring.len();
    if m == 0 {
        return Ok(AdaptedState::offline(model));
    }
    if ring.model_fingerprint != Some(model.fingerprint()) {
        return Err(Error::arg("ring was populated against a different model"));
    }
    let slots = w1.for_len(m)?;
    let entries = &ring.entries;

    // M = W₁⁻¹ + H₁ P₀ H₁ᵀ, filled symmetrically from the cached columns
    let mut inner = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let b = entries[i].hidden.dot(&entries[j].p0_h);
            inner[(i, j)] = b;
            inner[(j, i)] = b;
        }
        inner[(i, i)] += 1.0 / slots[i];
    }
    let residual = DVector::from_iterator(m, entries.iter().map(|e| e.t_scaled - e.h_beta0));
    let (gain, route) = linalg::solve_small_spd(inner, &residual, model.config().svd_tolerance)?;

    let mut beta1 = model.beta0().clone();
    for (e, g) in entries.iter().zip(gain.iter()) {
        beta1.axpy(*g, &e.p0_h, 1.0);
    }
    if beta1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("adapted weights are not finite".into()));
    }
    Ok(AdaptedState {
        beta1,
        ring_len: m,
        model_fingerprint: model.fingerprint(),
        route: Some(route),
    })
}

/// One-step-ahead prediction `H(x) β₁` in target units.
pub fn predict(model: &OfflineModel, state: &AdaptedState, x_next_raw: &[f64]) -> Result<f64> {
    if state.model_fingerprint != model.fingerprint() {
        return Err(Error::arg("adapted state belongs to a different model"));
    }
    Ok(model.unscale_target(model.hidden_for_raw(x_next_raw)?.dot(&state.beta1)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub push: Duration,
    pub adapt: Duration,
    pub predict: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.push + self.adapt + self.predict
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutput {
    pub prediction: f64,
    pub timings: PhaseTimings,
}

/// Whether a stream corrects `β₀` online or keeps it frozen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Adaptive,
    Static,
}

/// Per-stream online state: one ring and the current `β₁` over a shared model.
#[derive(Clone, Debug)]
pub struct OnlinePredictor {
    model: Arc<OfflineModel>,
    ring: RingBuffer,
    w1: OnlineWeights,
    state: AdaptedState,
    mode: Mode,
    // hidden row of the last predicted feature row, reused when that row is pushed
    last_hidden: Option<(Vec<f64>, DVector<f64>)>,
}

impl OnlinePredictor {
    pub fn new(model: Arc<OfflineModel>, ring_capacity: usize) -> Result<Self> {
        Self::with_weights(model, OnlineWeights::identity(ring_capacity.max(1)), ring_capacity)
    }

    pub fn with_weights(model: Arc<OfflineModel>, w1: OnlineWeights, ring_capacity: usize) -> Result<Self> {
        let ring = RingBuffer::new(ring_capacity)?;
        check_len(ring_capacity, w1.slots().len())?;
        let state = AdaptedState::offline(&model);
        Ok(Self { model, ring, w1, state, mode: Mode::Adaptive, last_hidden: None })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn model(&self) -> &Arc<OfflineModel> {
        &self.model
    }

    pub fn ring(&self) -> &RingBuffer {
        &self.ring
    }

    pub fn state(&self) -> &AdaptedState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Consumes a completed pair: push into the ring, then recompute `β₁`.
    /// A static stream ignores the pair.
    pub fn observe(&mut self, x_raw: &[f64], t_next_raw: f64) -> Result<PhaseTimings> {
        if self.mode == Mode::Static {
            return Ok(PhaseTimings::default());
        }
        let start = Instant::now();
        let cached = match self.last_hidden.take() {
            Some((x, h)) if bits_eq(&x, x_raw) => Some(h),
            _ => None,
        };
        self.ring.push_pair_with_hidden(&self.model, x_raw, t_next_raw, cached)?;
        let pushed = Instant::now();
        self.state = adapt(&self.model, &self.ring, &self.w1)?;
        let adapted = Instant::now();
        Ok(PhaseTimings {
            push: pushed - start,
            adapt: adapted - pushed,
            predict: Duration::ZERO,
        })
    }

    /// Predicts the target that follows `x_next_raw` using the current `β₁`.
    pub fn predict(&mut self, x_next_raw: &[f64]) -> Result<f64> {
        let hidden = self.model.hidden_for_raw(x_next_raw)?;
        let out = self.model.unscale_target(hidden.dot(self.state.beta1()));
        self.last_hidden = Some((x_next_raw.to_vec(), hidden));
        Ok(out)
    }

    /// `observe(x_n, t_{n+1})` then `predict(x_{n+1})`.
    pub fn step(&mut self, x_n: &[f64], t_next: f64, x_next: &[f64]) -> Result<StepOutput> {
        let mut timings = self.observe(x_n, t_next)?;
        let start = Instant::now();
        let prediction = self.predict(x_next)?;
        timings.predict = start.elapsed();
        Ok(StepOutput { prediction, timings })
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
