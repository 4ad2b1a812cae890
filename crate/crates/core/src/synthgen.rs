//! Synthetic near-chaotic series with random set-point steps.
//!
//! The state follows the logistic map `x ← μ x (1 − x)`. `μ` is held for a
//! dwell period drawn from `[dwell_min, dwell_max]` steps, then re-drawn
//! uniformly from `[mu_min, mu_max]`; each dwell is one set point. Record `k`
//! carries features `(x_k, μ, distractors…)` and target `x_{k+1} + noise`.
//! Noise is added to the recorded target only, never fed back into the
//! trajectory. Distractors are independent uniform `[0, 1)` columns.

use crate::dataset::{Record, SeriesDataset};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_steps: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    pub dwell_min: usize,
    pub dwell_max: usize,
    /// Standard deviation of the observation noise on targets.
    pub noise_sigma: f64,
    pub n_distractors: usize,
    /// Probability that a row is flagged invalid (outlier analog).
    pub invalid_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_steps: 1000,
            mu_min: 2.8,
            mu_max: 3.9,
            dwell_min: 10,
            dwell_max: 200,
            noise_sigma: 0.0,
            n_distractors: 0,
            invalid_fraction: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu_max && self.mu_max <= 4.0) {
            return Err(Error::arg(format!(
                "need 0 < mu_min <= mu_max <= 4 (got {}..{})",
                self.mu_min, self.mu_max
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::arg("noise sigma must be >= 0"));
        }
        if self.dwell_min == 0 || self.dwell_min > self.dwell_max {
            return Err(Error::arg("need 1 <= dwell_min <= dwell_max"));
        }
        if !(0.0..1.0).contains(&self.invalid_fraction) {
            return Err(Error::arg("invalid fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Feature count of generated rows.
    pub fn z(&self) -> usize {
        2 + self.n_distractors
    }
}

/// Generated series plus the dwell lengths that produced it.
#[derive(Clone, Debug)]
pub struct Generated {
    pub dataset: SeriesDataset,
    /// One entry per set point, in order; the last may be cut short by `n_steps`.
    pub dwells: Vec<usize>,
    /// Noiseless trajectory `x_0 … x_n` (one longer than the dataset).
    pub states: Vec<f64>,
}

#[inline]
pub fn logistic_map(mu: f64, x: f64) -> f64 {
    mu * x * (1.0 - x)
}

pub fn generate(cfg: &GenConfig) -> Result<SeriesDataset> {
    Ok(generate_detailed(cfg)?.dataset)
}

pub fn generate_detailed(cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut x = rng.uniform_range(0.1, 0.9);
    let mut records = Vec::with_capacity(cfg.n_steps);
    let mut dwells = Vec::new();
    let mut states = Vec::with_capacity(cfg.n_steps + 1);
    states.push(x);
    let mut set_point = 0u64;
    while records.len() < cfg.n_steps {
        let dwell = rng.range_inclusive(cfg.dwell_min, cfg.dwell_max);
        let mu = rng.uniform_range(cfg.mu_min, cfg.mu_max);
        let run = dwell.min(cfg.n_steps - records.len());
        dwells.push(run);
        for _ in 0..run {
            let next = logistic_map(mu, x);
            let mut features = Vec::with_capacity(cfg.z());
            features.push(x);
            features.push(mu);
            for _ in 0..cfg.n_distractors {
                features.push(rng.uniform());
            }
            let noise = if cfg.noise_sigma > 0.0 { cfg.noise_sigma * rng.normal() } else { 0.0 };
            let valid = cfg.invalid_fraction == 0.0 || rng.uniform() >= cfg.invalid_fraction;
            records.push(Record {
                step: records.len() as u64,
                set_point,
                features,
                target: next + noise,
                valid,
            });
            states.push(next);
            x = next;
        }
        set_point += 1;
    }
    Ok(Generated { dataset: SeriesDataset::from_records(cfg.z(), records)?, dwells, states })
}

/// Post-transient states of the map for one `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationSamples {
    pub mu: f64,
    pub samples: Vec<f64>,
}

impl BifurcationSamples {
    /// Number of clusters after sorting and splitting at gaps wider than `tol`.
    pub fn distinct(&self, tol: f64) -> usize {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        if s.is_empty() {
            return 0;
        }
        1 + s.windows(2).filter(|w| w[1] - w[0] > tol).count()
    }
}

/// Iterates the map from `x0 = 0.5 + 1e-3` for each `μ`, discarding
/// `transient_skip` iterates and keeping the next `samples`.
pub fn bifurcation_scan(mus: &[f64], transient_skip: usize, samples: usize) -> Result<Vec<BifurcationSamples>> {
    if let Some(bad) = mus.iter().find(|m| !(**m > 0.0 && **m <= 4.0)) {
        return Err(Error::arg(format!("mu {bad} outside (0, 4]")));
    }
    Ok(mus
        .iter()
        .map(|&mu| {
            // 0.5 maps to 1 and then 0 at mu = 4; start just off it
            let mut x = 0.5 + 1e-3;
            for _ in 0..transient_skip {
                x = logistic_map(mu, x);
            }
            let samples = (0..samples)
                .map(|_| {
                    x = logistic_map(mu, x);
                    x
                })
                .collect();
            BifurcationSamples { mu, samples }
        })
        .collect())
}

/// Evenly spaced `μ` grid over `[lo, hi]`.
pub fn mu_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}
