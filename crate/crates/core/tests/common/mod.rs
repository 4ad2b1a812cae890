#![allow(dead_code)]

use nalgebra::DMatrix;
use wrelm::elm::{Activation, InputWeights};
use wrelm::oracle::StackedSystem;
use wrelm::rng::SeededRng;
use wrelm::verify::to_dense;
use wrelm::{OfflineModel, OfflineWeights, Scaler, TrainConfig};

/// Offline data already in scaled units, plus the weights that produced `h`.
pub struct Instance {
    pub weights: InputWeights,
    pub x: DMatrix<f64>,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn instance(seed: u64, n: usize, z: usize, neurons: usize) -> Instance {
    let mut rng = SeededRng::new(seed);
    let weights = InputWeights::generate(rng.next_u64(), z, neurons).unwrap();
    let x = DMatrix::from_fn(n, z, |_, _| rng.uniform());
    let t = (0..n).map(|_| rng.uniform()).collect();
    let w = (0..n).map(|_| rng.uniform_range(0.5, 2.0)).collect();
    Instance { weights, x, t, w }
}

pub fn fit(inst: &Instance) -> OfflineModel {
    fit_weighted(inst, &inst.w)
}

pub fn fit_weighted(inst: &Instance, w: &[f64]) -> OfflineModel {
    let cfg = TrainConfig { w0: OfflineWeights::PerSample(w.to_vec()), ..Default::default() };
    OfflineModel::fit_scaled(
        inst.weights.clone(),
        Scaler::identity(inst.x.ncols()),
        Scaler::identity(1),
        &inst.x,
        &inst.t,
        w,
        cfg,
    )
    .unwrap()
}

pub fn system(inst: &Instance) -> StackedSystem {
    let h = wrelm::elm::hidden_matrix(&inst.weights, &inst.x, Activation::Pade).unwrap();
    StackedSystem::new(to_dense(&h), inst.w.clone(), inst.t.clone()).unwrap()
}

pub fn row(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    m.row(k).iter().copied().collect()
}

/// `max |a − b| / max |b|`.
pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    wrelm::verify::rel_inf_err(a, b)
}
