//! Randomized equivalence battery: trainer and adapter against the oracle.
//!
//! Each instance draws `n₀` offline rows and `m` ring rows of uniform
//! `[0, 1)` scaled inputs, uniform targets, Gaussian input weights and
//! random positive diagonal weights, then compares
//!
//! * trainer `β₀` with the oracle solve of `(H₀, W₀, T₀)`, and
//! * adapter `β₁` with the oracle solve of the stacked system
//!   `([H₀; H₁], blockdiag(W₀, W₁), [T₀; T₁])`,
//!
//! by relative ∞-norm error.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::adapter::{adapt, OnlineWeights, RingBuffer};
use crate::elm::{self, Activation, InputWeights};
use crate::error::Result;
use crate::oracle::{self, Dense, StackedSystem};
use crate::rng::SeededRng;
use crate::scaler::Scaler;
use crate::trainer::{OfflineModel, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub n0: (usize, usize),
    pub m_max: usize,
    pub z: (usize, usize),
    pub neurons: (usize, usize),
    /// Range the diagonal weights are drawn from (uniform).
    pub weight_range: (f64, f64),
    pub activation: Activation,
    pub tolerance: f64,
    /// Perturbs every adapted `β₁` before comparison; the battery must then fail.
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            seed: 20_240_601,
            n0: (50, 500),
            m_max: 8,
            z: (2, 8),
            neurons: (4, 32),
            weight_range: (0.5, 2.0),
            activation: Activation::Pade,
            tolerance: 1e-8,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceResult {
    pub index: usize,
    pub n0: usize,
    pub m: usize,
    pub z: usize,
    pub n_neurons: usize,
    /// Condition number of `H₀ᵀ W₀ H₀` reported by the trainer.
    pub condition: f64,
    pub offline_rel_err: f64,
    pub online_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub tolerance: f64,
    pub results: Vec<InstanceResult>,
}

impl VerifyReport {
    pub fn max_offline_err(&self) -> f64 {
        self.results.iter().map(|r| r.offline_rel_err).fold(0.0, f64::max)
    }

    pub fn max_online_err(&self) -> f64 {
        self.results.iter().map(|r| r.online_rel_err).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&InstanceResult> {
        self.results
            .iter()
            .filter(|r| !(r.offline_rel_err <= self.tolerance && r.online_rel_err <= self.tolerance))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// `max |a − b| / max |b|`.
pub fn rel_inf_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn to_dense(m: &DMatrix<f64>) -> Dense {
    let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
    Dense::from_row_major(m.nrows(), m.ncols(), data).expect("shape from matrix")
}

pub fn run_battery(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut rng = SeededRng::new(cfg.seed);
    let mut results = Vec::with_capacity(cfg.instances);
    for index in 0..cfg.instances {
        results.push(run_instance(cfg, index, &mut rng)?);
    }
    Ok(VerifyReport { tolerance: cfg.tolerance, results })
}

fn run_instance(cfg: &VerifyConfig, index: usize, rng: &mut SeededRng) -> Result<InstanceResult> {
    let n0 = rng.range_inclusive(cfg.n0.0, cfg.n0.1);
    let m = rng.range_inclusive(0, cfg.m_max);
    let z = rng.range_inclusive(cfg.z.0, cfg.z.1);
    let n_neurons = rng.range_inclusive(cfg.neurons.0, cfg.neurons.1);
    let weights = InputWeights::generate(rng.next_u64(), z, n_neurons)?;
    let (wlo, whi) = cfg.weight_range;

    let x0 = DMatrix::from_fn(n0, z, |_, _| rng.uniform());
    let t0: Vec<f64> = (0..n0).map(|_| rng.uniform()).collect();
    let w0: Vec<f64> = (0..n0).map(|_| rng.uniform_range(wlo, whi)).collect();
    let x1 = DMatrix::from_fn(m, z, |_, _| rng.uniform());
    let t1: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
    let w1: Vec<f64> = (0..m.max(1)).map(|_| rng.uniform_range(wlo, whi)).collect();

    let train_cfg = TrainConfig { activation: cfg.activation, ..Default::default() };
    let model = Arc::new(OfflineModel::fit_scaled(
        weights.clone(),
        Scaler::identity(z),
        Scaler::identity(1),
        &x0,
        &t0,
        &w0,
        train_cfg,
    )?);

    let h0 = elm::hidden_matrix(&weights, &x0, cfg.activation)?;
    let offline_sys = StackedSystem::new(to_dense(&h0), w0.clone(), t0.clone())?;
    let beta0_oracle = oracle::batch_weighted_ls(&offline_sys)?;
    let offline_rel_err = rel_inf_err(model.beta0().as_slice(), &beta0_oracle);

    let mut ring = RingBuffer::new(m.max(1))?;
    for k in 0..m {
        let row: Vec<f64> = x1.row(k).iter().copied().collect();
        ring.push_pair(&model, &row, t1[k])?;
    }
    let online = OnlineWeights::per_slot(w1.clone())?;
    let state = adapt(&model, &ring, &online)?;
    let mut beta1: DVector<f64> = state.beta1().clone();
    if cfg.inject_fault {
        let bump = 1e-6 * beta1.amax().max(1.0);
        beta1.add_scalar_mut(bump);
    }

    let h1 = elm::hidden_matrix(&weights, &x1, cfg.activation)?;
    let ring_sys = StackedSystem::new(to_dense(&h1), w1[..m].to_vec(), t1)?;
    let stacked = oracle::stack(&offline_sys, &ring_sys)?;
    let beta1_oracle = oracle::batch_weighted_ls(&stacked)?;
    let online_rel_err = rel_inf_err(beta1.as_slice(), &beta1_oracle);

    Ok(InstanceResult {
        index,
        n0,
        m,
        z,
        n_neurons,
        condition: model.diagnostics().condition,
        offline_rel_err,
        online_rel_err,
    })
}
