//! Weighted batch training of the offline solution.
//!
//! Given hidden outputs `H₀`, a positive diagonal weight `W₀` and scaled
//! targets `T₀`:
//!
//! ```text
//! K₀ = H₀ᵀ W₀ H₀
//! P₀ = pinv(K₀)            (SVD, relative cutoff svd_tolerance)
//! β₀ = P₀ H₀ᵀ W₀ T₀
//! ```
//!
//! `P₀` and `β₀` are all the online path needs; the training rows are not
//! retained.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::dataset::SeriesDataset;
use crate::elm::{self, Activation, InputWeights, DEFAULT_NEURONS, DEFAULT_SEED};
use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{self, PinvInfo, DEFAULT_SVD_TOLERANCE};
use crate::scaler::{Scaler, DEFAULT_P_HIGH, DEFAULT_P_LOW};

pub const DEFAULT_W0: f64 = 3.5e-3;

/// Offline sample weights: one scalar for every row or one weight per dataset record.
#[derive(Clone, Debug, PartialEq)]
pub enum OfflineWeights {
    Scalar(f64),
    PerSample(Vec<f64>),
}

impl Default for OfflineWeights {
    fn default() -> Self {
        OfflineWeights::Scalar(DEFAULT_W0)
    }
}

impl OfflineWeights {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            OfflineWeights::Scalar(w) => w.is_finite() && *w > 0.0,
            OfflineWeights::PerSample(ws) => ws.iter().all(|w| w.is_finite() && *w > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg("offline weights must be finite and > 0"))
        }
    }

    /// Weights for the dataset records at `indices`.
    fn select(&self, indices: &[usize]) -> Vec<f64> {
        match self {
            OfflineWeights::Scalar(w) => vec![*w; indices.len()],
            OfflineWeights::PerSample(ws) => indices.iter().map(|&i| ws[i]).collect(),
        }
    }

    /// Multiplies every weight by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            OfflineWeights::Scalar(w) => OfflineWeights::Scalar(w * c),
            OfflineWeights::PerSample(ws) => OfflineWeights::PerSample(ws.iter().map(|w| w * c).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PruneConfig {
    pub n_before: usize,
    pub n_after: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { n_before: 6, n_after: 9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub n_neurons: usize,
    pub w0: OfflineWeights,
    pub p_low: f64,
    pub p_high: f64,
    pub activation: Activation,
    pub svd_tolerance: f64,
    pub prune: Option<PruneConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_neurons: DEFAULT_NEURONS,
            w0: OfflineWeights::default(),
            p_low: DEFAULT_P_LOW,
            p_high: DEFAULT_P_HIGH,
            activation: Activation::Pade,
            svd_tolerance: DEFAULT_SVD_TOLERANCE,
            prune: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::arg("n_neurons must be >= 1"));
        }
        if !(self.svd_tolerance.is_finite() && self.svd_tolerance > 0.0) {
            return Err(Error::arg("svd_tolerance must be > 0"));
        }
        self.w0.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainDiagnostics {
    pub train_rows: usize,
    /// Numerical rank of `K₀` after the SVD cutoff.
    pub rank: usize,
    /// Condition number of `K₀`.
    pub condition: f64,
}

/// Frozen result of offline training. Nothing mutates it after construction.
#[derive(Clone, Debug)]
pub struct OfflineModel {
    input_weights: InputWeights,
    feature_scaler: Scaler,
    target_scaler: Scaler,
    p0: DMatrix<f64>,
    beta0: DVector<f64>,
    config: TrainConfig,
    diagnostics: TrainDiagnostics,
    fingerprint: u64,
}

/// `P₀` and `β₀` for explicit `H₀`, `W₀` (diagonal) and `T₀`.
#[derive(Clone, Debug)]
pub struct OfflineSolution {
    pub p0: DMatrix<f64>,
    pub beta0: DVector<f64>,
    pub info: PinvInfo,
}

pub fn solve_offline(h0: &DMatrix<f64>, w0: &[f64], t0: &[f64], svd_tolerance: f64) -> Result<OfflineSolution> {
    let n = h0.nrows();
    check_len(n, w0.len())?;
    check_len(n, t0.len())?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    // H₀ᵀ W₀ as an Ñ × n matrix
    let mut htw = h0.transpose();
    for (mut col, w) in htw.column_iter_mut().zip(w0) {
        col *= *w;
    }
    let k0 = &htw * h0;
    let (p, info) = linalg::pinv(&k0, svd_tolerance)?;
    let p0 = (&p + p.transpose()) * 0.5;
    let beta0 = &p0 * (&htw * DVector::from_column_slice(t0));
    if beta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("offline solution is not finite".into()));
    }
    Ok(OfflineSolution { p0, beta0, info })
}

/// Indices kept by [`prune_transients`].
pub fn prune_indices(ds: &SeriesDataset, n_before: usize, n_after: usize) -> Vec<usize> {
    let recs = ds.records();
    let mut keep = vec![false; recs.len()];
    for step in 1..recs.len() {
        if recs[step].set_point != recs[step - 1].set_point {
            let start = step.saturating_sub(n_before);
            let end = (step + n_after).min(recs.len());
            keep[start..end].iter_mut().for_each(|k| *k = true);
        }
    }
    keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect()
}

/// Keeps only the rows within `n_before` rows before and `n_after` rows from
/// each set-point change (the changed row counts as the first "after" row).
pub fn prune_transients(ds: &SeriesDataset, n_before: usize, n_after: usize) -> SeriesDataset {
    ds.select(&prune_indices(ds, n_before, n_after))
}

pub fn train_offline(ds: &SeriesDataset, cfg: &TrainConfig) -> Result<OfflineModel> {
    cfg.validate()?;
    if let OfflineWeights::PerSample(ws) = &cfg.w0 {
        check_len(ds.len(), ws.len())?;
    }
    let candidates: Vec<usize> = match cfg.prune {
        Some(p) => prune_indices(ds, p.n_before, p.n_after),
        None => (0..ds.len()).collect(),
    };
    let rows: Vec<usize> = candidates.into_iter().filter(|&i| ds.records()[i].valid).collect();
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let z = ds.z();
    let mut x = DMatrix::zeros(rows.len(), z);
    let mut t = DMatrix::zeros(rows.len(), 1);
    for (k, &i) in rows.iter().enumerate() {
        let r = &ds.records()[i];
        check_finite(&r.features, "training features")?;
        check_finite(&[r.target], "training target")?;
        for (j, v) in r.features.iter().enumerate() {
            x[(k, j)] = *v;
        }
        t[(k, 0)] = r.target;
    }
    let feature_scaler = Scaler::fit(&x, cfg.p_low, cfg.p_high)?;
    let target_scaler = Scaler::fit(&t, cfg.p_low, cfg.p_high)?;
    let x_scaled = feature_scaler.apply_matrix(&x)?;
    let t_scaled: Vec<f64> = target_scaler.apply_matrix(&t)?.iter().copied().collect();
    let weights = InputWeights::generate(cfg.seed, z, cfg.n_neurons)?;
    let w0 = cfg.w0.select(&rows);
    OfflineModel::fit_scaled(weights, feature_scaler, target_scaler, &x_scaled, &t_scaled, &w0, cfg.clone())
}

impl OfflineModel {
    /// Trains from inputs and targets already in scaled units.
    ///
    /// `cfg.seed` / `cfg.n_neurons` are overwritten from `weights`.
    pub fn fit_scaled(
        weights: InputWeights,
        feature_scaler: Scaler,
        target_scaler: Scaler,
        x_scaled: &DMatrix<f64>,
        t_scaled: &[f64],
        w0: &[f64],
        mut cfg: TrainConfig,
    ) -> Result<Self> {
        check_len(weights.z(), feature_scaler.arity())?;
        check_len(1, target_scaler.arity())?;
        if w0.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::arg("offline weights must be finite and > 0"));
        }
        let h0 = elm::hidden_matrix(&weights, x_scaled, cfg.activation)?;
        let sol = solve_offline(&h0, w0, t_scaled, cfg.svd_tolerance)?;
        cfg.seed = weights.seed();
        cfg.n_neurons = weights.n_neurons();
        let diagnostics = TrainDiagnostics {
            train_rows: x_scaled.nrows(),
            rank: sol.info.rank,
            condition: sol.info.condition,
        };
        Ok(Self::from_parts(weights, feature_scaler, target_scaler, sol.p0, sol.beta0, cfg, diagnostics))
    }

    pub(crate) fn from_parts(
        input_weights: InputWeights,
        feature_scaler: Scaler,
        target_scaler: Scaler,
        p0: DMatrix<f64>,
        beta0: DVector<f64>,
        config: TrainConfig,
        diagnostics: TrainDiagnostics,
    ) -> Self {
        let mut hasher = DefaultHasher::new();
        for v in input_weights.matrix().iter().chain(p0.iter()).chain(beta0.iter()) {
            v.to_bits().hash(&mut hasher);
        }
        for b in feature_scaler.bounds().iter().chain(target_scaler.bounds()) {
            b.lo.to_bits().hash(&mut hasher);
            b.hi.to_bits().hash(&mut hasher);
        }
        config.activation.tag().hash(&mut hasher);
        Self {
            input_weights,
            feature_scaler,
            target_scaler,
            p0,
            beta0,
            config,
            diagnostics,
            fingerprint: hasher.finish(),
        }
    }

    pub fn input_weights(&self) -> &InputWeights {
        &self.input_weights
    }

    pub fn feature_scaler(&self) -> &Scaler {
        &self.feature_scaler
    }

    pub fn target_scaler(&self) -> &Scaler {
        &self.target_scaler
    }

    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }

    pub fn beta0(&self) -> &DVector<f64> {
        &self.beta0
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn diagnostics(&self) -> &TrainDiagnostics {
        &self.diagnostics
    }

    pub fn activation(&self) -> Activation {
        self.config.activation
    }

    pub fn z(&self) -> usize {
        self.input_weights.z()
    }

    pub fn n_neurons(&self) -> usize {
        self.input_weights.n_neurons()
    }

    /// Content hash identifying this model within a process.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Hidden row for a raw (unscaled) feature row.
    pub fn hidden_for_raw(&self, x_raw: &[f64]) -> Result<DVector<f64>> {
        check_finite(x_raw, "feature row")?;
        let x = self.feature_scaler.apply(x_raw)?;
        elm::hidden_row(&self.input_weights, &x, self.config.activation)
    }

    /// Maps a scaled-unit prediction to target units.
    pub fn unscale_target(&self, scaled: f64) -> f64 {
        self.target_scaler.bounds()[0].unscale(scaled)
    }

    pub fn scale_target(&self, target: f64) -> f64 {
        self.target_scaler.bounds()[0].scale(target)
    }

    /// Static (non-adapted) prediction `H(x) β₀` in target units.
    pub fn predict_offline(&self, x_raw: &[f64]) -> Result<f64> {
        Ok(self.unscale_target(self.hidden_for_raw(x_raw)?.dot(&self.beta0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Record;
    use crate::rng::SeededRng;

    fn stepped(set_points: &[u64]) -> SeriesDataset {
        let recs = set_points
            .iter()
            .enumerate()
            .map(|(k, &sp)| Record {
                step: k as u64,
                set_point: sp,
                features: vec![k as f64],
                target: 0.0,
                valid: true,
            })
            .collect();
        SeriesDataset::from_records(1, recs).unwrap()
    }

    #[test]
    fn prune_without_transitions_is_empty() {
        assert!(prune_transients(&stepped(&[3; 50]), 6, 9).is_empty());
    }

    #[test]
    fn prune_single_transition_window() {
        let sp: Vec<u64> = (0..200).map(|k| u64::from(k >= 100)).collect();
        let kept = prune_indices(&stepped(&sp), 6, 9);
        assert_eq!(kept, (94..=108).collect::<Vec<_>>());
    }

    #[test]
    fn prune_overlapping_windows_union() {
        let sp: Vec<u64> = (0..60).map(|k| if k < 20 { 0 } else if k < 25 { 1 } else { 2 }).collect();
        let kept = prune_indices(&stepped(&sp), 6, 9);
        // brute-force set union of [t - 6, t + 9) over transitions t in {20, 25}
        let mut oracle = std::collections::BTreeSet::new();
        for t in [20usize, 25] {
            for i in t.saturating_sub(6)..(t + 9).min(60) {
                oracle.insert(i);
            }
        }
        assert_eq!(kept, oracle.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn prune_clips_at_edges() {
        let sp = [0, 0, 1, 1, 1];
        assert_eq!(prune_indices(&stepped(&sp), 6, 9), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig { n_neurons: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.n_neurons = 4;
        cfg.w0 = OfflineWeights::Scalar(0.0);
        assert!(cfg.validate().is_err());
        cfg.w0 = OfflineWeights::PerSample(vec![1.0, -1.0]);
        assert!(cfg.validate().is_err());
        cfg.w0 = OfflineWeights::Scalar(1.0);
        cfg.svd_tolerance = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn interpolation_regime_reproduces_targets() {
        let mut rng = SeededRng::new(4);
        let n = 12;
        let w = InputWeights::generate(21, 4, n).unwrap();
        let x = DMatrix::from_fn(n, 4, |_, _| rng.uniform());
        let h = elm::hidden_matrix(&w, &x, Activation::Exact).unwrap();
        let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let sol = solve_offline(&h, &vec![1.0; n], &t, DEFAULT_SVD_TOLERANCE).unwrap();
        let fit = &h * &sol.beta0;
        let err = fit.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = t.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * scale, "err {err} cond {}", sol.info.condition);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let ds = SeriesDataset::new(2);
        assert!(matches!(train_offline(&ds, &TrainConfig::default()), Err(Error::EmptyDataset)));
        let recs = vec![
            Record { step: 0, set_point: 0, features: vec![0.0, f64::NAN], target: 1.0, valid: true },
            Record { step: 1, set_point: 0, features: vec![1.0, 2.0], target: 1.0, valid: true },
        ];
        let ds = SeriesDataset::from_records(2, recs).unwrap();
        assert!(matches!(train_offline(&ds, &TrainConfig::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let recs = (0..10)
            .map(|k| Record {
                step: k,
                set_point: 0,
                features: vec![k as f64, 5.0],
                target: k as f64,
                valid: true,
            })
            .collect();
        let ds = SeriesDataset::from_records(2, recs).unwrap();
        assert!(matches!(
            train_offline(&ds, &TrainConfig::default()),
            Err(Error::DegenerateColumn { column: 1 })
        ));
    }
}
