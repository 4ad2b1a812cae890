mod common;

use std::sync::Arc;

use common::{fit, instance, rel, row, system};
use nalgebra::DMatrix;
use wrelm::adapter::{adapt, OnlineWeights, RingBuffer};
use wrelm::oracle::{self, StackedSystem};
use wrelm::rng::SeededRng;
use wrelm::synthgen::{self, GenConfig};
use wrelm::verify::to_dense;
use wrelm::{train_offline, Activation, OfflineModel, OnlinePredictor, TrainConfig};

fn ring_from(model: &OfflineModel, x: &DMatrix<f64>, t: &[f64], cap: usize) -> RingBuffer {
    let mut ring = RingBuffer::new(cap).unwrap();
    for k in 0..t.len() {
        ring.push_pair(model, &row(x, k), t[k]).unwrap();
    }
    ring
}

#[test]
fn beta1_matches_stacked_oracle() {
    let inst = instance(201, 300, 5, 16);
    let model = fit(&inst);
    let mut rng = SeededRng::new(7);
    let x1 = DMatrix::from_fn(8, 5, |_, _| rng.uniform());
    let t1: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
    let w1: Vec<f64> = (0..8).map(|_| rng.uniform_range(0.5, 2.0)).collect();
    let ring = ring_from(&model, &x1, &t1, 8);
    let state = adapt(&model, &ring, &OnlineWeights::per_slot(w1.clone()).unwrap()).unwrap();

    let h1 = wrelm::elm::hidden_matrix(&inst.weights, &x1, Activation::Pade).unwrap();
    let stacked =
        oracle::stack(&system(&inst), &StackedSystem::new(to_dense(&h1), w1, t1).unwrap()).unwrap();
    let beta = oracle::batch_weighted_ls(&stacked).unwrap();
    let err = rel(state.beta1().as_slice(), &beta);
    assert!(err <= 1e-8, "relative error {err:e}");
}

#[test]
fn partial_ring_uses_newest_weight_slots() {
    let inst = instance(202, 200, 4, 10);
    let model = fit(&inst);
    let mut rng = SeededRng::new(8);
    let x1 = DMatrix::from_fn(3, 4, |_, _| rng.uniform());
    let t1: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
    let slots = vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.5, 2.0];
    let ring = ring_from(&model, &x1, &t1, 8);
    let state = adapt(&model, &ring, &OnlineWeights::per_slot(slots.clone()).unwrap()).unwrap();

    let h1 = wrelm::elm::hidden_matrix(&inst.weights, &x1, Activation::Pade).unwrap();
    let w_used = slots[5..].to_vec();
    let stacked = oracle::stack(&system(&inst), &StackedSystem::new(to_dense(&h1), w_used, t1).unwrap()).unwrap();
    assert!(rel(state.beta1().as_slice(), &oracle::batch_weighted_ls(&stacked).unwrap()) <= 1e-8);
}

#[test]
fn histories_sharing_last_pairs_agree() {
    let inst = instance(203, 200, 3, 12);
    let model = fit(&inst);
    let mut rng = SeededRng::new(9);
    let shared = DMatrix::from_fn(8, 3, |_, _| rng.uniform());
    let shared_t: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
    let w1 = OnlineWeights::identity(8);

    let mut a = RingBuffer::new(8).unwrap();
    let mut b = RingBuffer::new(8).unwrap();
    for _ in 0..5 {
        a.push_pair(&model, &[rng.uniform(), rng.uniform(), rng.uniform()], rng.uniform()).unwrap();
    }
    for _ in 0..23 {
        b.push_pair(&model, &[rng.uniform(), rng.uniform(), rng.uniform()], rng.uniform()).unwrap();
    }
    for k in 0..8 {
        a.push_pair(&model, &row(&shared, k), shared_t[k]).unwrap();
        b.push_pair(&model, &row(&shared, k), shared_t[k]).unwrap();
    }
    let sa = adapt(&model, &a, &w1).unwrap();
    let sb = adapt(&model, &b, &w1).unwrap();
    assert!(rel(sa.beta1().as_slice(), sb.beta1().as_slice()) <= 1e-12);

    // no hidden state: adapting again is bit-identical
    let again = adapt(&model, &a, &w1).unwrap();
    assert_eq!(
        sa.beta1().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        again.beta1().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn joint_weight_scale_invariance() {
    let inst = instance(204, 250, 6, 14);
    let mut rng = SeededRng::new(10);
    let x1 = DMatrix::from_fn(8, 6, |_, _| rng.uniform());
    let t1: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
    let w1: Vec<f64> = (0..8).map(|_| rng.uniform_range(0.5, 2.0)).collect();
    let base_model = fit(&inst);
    let base_ring = ring_from(&base_model, &x1, &t1, 8);
    let base = adapt(&base_model, &base_ring, &OnlineWeights::per_slot(w1.clone()).unwrap()).unwrap();
    for c in [1e-3, 1.0, 1e3] {
        let w0: Vec<f64> = inst.w.iter().map(|w| w * c).collect();
        let model = common::fit_weighted(&inst, &w0);
        assert!(rel(model.beta0().as_slice(), base_model.beta0().as_slice()) <= 1e-10);
        let ring = ring_from(&model, &x1, &t1, 8);
        let online = OnlineWeights::per_slot(w1.clone()).unwrap().scaled(c).unwrap();
        let s = adapt(&model, &ring, &online).unwrap();
        assert!(rel(s.beta1().as_slice(), base.beta1().as_slice()) <= 1e-10, "c = {c}");
    }
}

#[test]
fn stacked_solution_is_residual_optimal() {
    // fifty random systems: no small perturbation of beta1 lowers the stacked weighted SSE
    for seed in 0..50u64 {
        let mut rng = SeededRng::new(1000 + seed);
        let z = rng.range_inclusive(4, 7);
        let n = rng.range_inclusive(4, 12);
        let inst = instance(300 + seed, rng.range_inclusive(80, 200), z, n);
        let model = fit(&inst);
        let m = rng.range_inclusive(1, 8);
        let x1 = DMatrix::from_fn(m, z, |_, _| rng.uniform());
        let t1: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
        let ring = ring_from(&model, &x1, &t1, 8);
        let state = adapt(&model, &ring, &OnlineWeights::identity(8)).unwrap();
        let h1 = wrelm::elm::hidden_matrix(&inst.weights, &x1, Activation::Pade).unwrap();
        let stacked =
            oracle::stack(&system(&inst), &StackedSystem::new(to_dense(&h1), vec![1.0; m], t1).unwrap()).unwrap();
        let beta: Vec<f64> = state.beta1().iter().copied().collect();
        let best = stacked.weighted_sse(&beta);
        for _ in 0..20 {
            let probe: Vec<f64> = beta.iter().map(|b| b + 1e-4 * rng.normal()).collect();
            assert!(stacked.weighted_sse(&probe) >= best * (1.0 - 1e-12), "seed {seed}");
        }
    }
}

#[test]
fn constant_ring_contracts_error_by_closed_form() {
    // m identical pairs (h, c) with unit weights: the adapted prediction at h is
    // c − (c − hβ₀) / (1 + m·hP₀hᵀ)
    let inst = instance(205, 200, 3, 8);
    let model = fit(&inst);
    let x = [0.4, 0.6, 0.2];
    let c = 0.9;
    let h = model.hidden_for_raw(&x).unwrap();
    let s = (model.p0() * &h).dot(&h);
    let before = h.dot(model.beta0());
    let mut p = OnlinePredictor::new(Arc::new(model), 8).unwrap();
    for m in 1..=12usize {
        p.observe(&x, c).unwrap();
        let k = m.min(8) as f64;
        let expected = c - (c - before) / (1.0 + k * s);
        let got = p.predict(&x).unwrap();
        assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "m = {m}: {got} vs {expected}");
    }
    assert!((p.predict(&x).unwrap() - c).abs() < (c - before).abs());
}

/// Hand-rolled causal chain: frozen artifacts read from the model, everything
/// else recomputed with plain loops and a pivoted Gauss–Jordan solve.
struct Reference {
    a: Vec<Vec<f64>>, // z × Ñ
    lo: Vec<f64>,
    hi: Vec<f64>,
    t_lo: f64,
    t_hi: f64,
    p0: Vec<Vec<f64>>,
    beta0: Vec<f64>,
    ring: Vec<(Vec<f64>, f64)>,
    cap: usize,
}

impl Reference {
    fn new(m: &OfflineModel, cap: usize) -> Self {
        let (z, n) = (m.z(), m.n_neurons());
        let a = (0..z).map(|r| (0..n).map(|c| m.input_weights().matrix()[(r, c)]).collect()).collect();
        let b = m.feature_scaler().bounds();
        let tb = m.target_scaler().bounds()[0];
        Self {
            a,
            lo: b.iter().map(|b| b.lo).collect(),
            hi: b.iter().map(|b| b.hi).collect(),
            t_lo: tb.lo,
            t_hi: tb.hi,
            p0: (0..n).map(|r| (0..n).map(|c| m.p0()[(r, c)]).collect()).collect(),
            beta0: m.beta0().iter().copied().collect(),
            ring: Vec::new(),
            cap,
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let xs: Vec<f64> =
            x.iter().enumerate().map(|(j, v)| ((v - self.lo[j]) / (self.hi[j] - self.lo[j])).clamp(0.0, 1.0)).collect();
        (0..self.beta0.len())
            .map(|i| {
                let y: f64 = (0..xs.len()).map(|j| xs[j] * self.a[j][i]).sum();
                let p = (120.0 + 60.0 * y + 12.0 * y * y + y * y * y) / (120.0 - 60.0 * y + 12.0 * y * y - y * y * y);
                1.0 / (1.0 + p)
            })
            .collect()
    }

    fn beta1(&self) -> Vec<f64> {
        let n = self.beta0.len();
        let m = self.ring.len();
        if m == 0 {
            return self.beta0.clone();
        }
        let hs: Vec<Vec<f64>> = self.ring.iter().map(|(x, _)| self.hidden(x)).collect();
        let ts: Vec<f64> =
            self.ring.iter().map(|(_, t)| ((t - self.t_lo) / (self.t_hi - self.t_lo)).clamp(0.0, 1.0)).collect();
        // A = P0 H1ᵀ (Ñ × m); S = I + H1 A (unit weights)
        let a: Vec<Vec<f64>> =
            (0..n).map(|r| (0..m).map(|k| (0..n).map(|c| self.p0[r][c] * hs[k][c]).sum()).collect()).collect();
        let mut s: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| f64::from(u8::from(i == j)) + (0..n).map(|c| hs[i][c] * a[c][j]).sum::<f64>()).collect())
            .collect();
        let mut rhs: Vec<f64> = (0..m).map(|k| ts[k] - (0..n).map(|c| hs[k][c] * self.beta0[c]).sum::<f64>()).collect();
        for col in 0..m {
            let piv = (col..m).max_by(|&i, &j| s[i][col].abs().total_cmp(&s[j][col].abs())).unwrap();
            s.swap(col, piv);
            rhs.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = s[r][col] / s[col][col];
                    for c in col..m {
                        s[r][c] -= f * s[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
        let u: Vec<f64> = (0..m).map(|k| rhs[k] / s[k][k]).collect();
        (0..n).map(|r| self.beta0[r] + (0..m).map(|k| a[r][k] * u[k]).sum::<f64>()).collect()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let h = self.hidden(x);
        let b = self.beta1();
        let s: f64 = h.iter().zip(&b).map(|(h, b)| h * b).sum();
        self.t_lo + s * (self.t_hi - self.t_lo)
    }

    fn observe(&mut self, x: &[f64], t: f64) {
        if self.ring.len() == self.cap {
            self.ring.remove(0);
        }
        self.ring.push((x.to_vec(), t));
    }
}

fn trained_on_stream() -> (Arc<OfflineModel>, wrelm::SeriesDataset) {
    let train = synthgen::generate(&GenConfig {
        seed: 21,
        n_steps: 3000,
        mu_min: 2.8,
        mu_max: 3.4,
        noise_sigma: 0.01,
        n_distractors: 2,
        ..Default::default()
    })
    .unwrap();
    let test = synthgen::generate(&GenConfig {
        seed: 22,
        n_steps: 600,
        noise_sigma: 0.01,
        n_distractors: 2,
        ..Default::default()
    })
    .unwrap();
    let model = train_offline(&train, &TrainConfig { n_neurons: 24, ..Default::default() }).unwrap();
    (Arc::new(model), test)
}

#[test]
fn causal_chain_matches_straight_line_reference() {
    let (model, test) = trained_on_stream();
    let mut reference = Reference::new(&model, 8);
    let mut p = OnlinePredictor::new(Arc::clone(&model), 8).unwrap();
    let mut worst: f64 = 0.0;
    for r in test.records() {
        let got = p.predict(&r.features).unwrap();
        let want = reference.predict(&r.features);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
        p.observe(&r.features, r.target).unwrap();
        reference.observe(&r.features, r.target);
    }
    assert!(worst <= 1e-10, "worst deviation {worst:e}");
}

#[test]
fn cached_streaming_matches_cache_free_recompute() {
    let (model, test) = trained_on_stream();
    let mut p = OnlinePredictor::new(Arc::clone(&model), 8).unwrap();
    let mut pairs: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in test.records() {
        // rebuild a fresh ring from the raw pairs and adapt from scratch
        let mut ring = RingBuffer::new(8).unwrap();
        for (x, t) in &pairs[pairs.len().saturating_sub(8)..] {
            ring.push_pair(&model, x, *t).unwrap();
        }
        let fresh = adapt(&model, &ring, &OnlineWeights::identity(8)).unwrap();
        let want = wrelm::predict(&model, &fresh, &r.features).unwrap();
        let got = p.predict(&r.features).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "step {}", r.step);
        p.observe(&r.features, r.target).unwrap();
        pairs.push((r.features.clone(), r.target));
    }
}

#[test]
fn empty_ring_is_offline_solution() {
    let inst = instance(206, 100, 3, 6);
    let model = fit(&inst);
    let s = adapt(&model, &RingBuffer::new(8).unwrap(), &OnlineWeights::identity(8)).unwrap();
    let bits = |v: &nalgebra::DVector<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(s.beta1()), bits(model.beta0()));
}
