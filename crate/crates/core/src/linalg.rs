//! Dense helpers used by the trainer and the adapter (nalgebra-backed).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative singular-value cutoff.
pub const DEFAULT_SVD_TOLERANCE: f64 = 1e-12;

/// Condition estimate above which the small inner system falls back to SVD.
pub const INNER_CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinvInfo {
    /// Singular values kept above the cutoff.
    pub rank: usize,
    /// `σ_max / σ_min` over all singular values (infinite when singular).
    pub condition: f64,
}

/// Moore–Penrose pseudo-inverse by SVD; singular values below
/// `rel_tol · σ_max` are treated as zero.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> Result<(DMatrix<f64>, PinvInfo)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry before SVD".into()));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok((DMatrix::zeros(cols, rows), PinvInfo { rank: 0, condition: f64::INFINITY }));
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma = &svd.singular_values;
    let s_max = sigma.max();
    let s_min = sigma.min();
    let cutoff = rel_tol * s_max;
    let mut out = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            // out += v_k * u_k^T / s
            let vk = v_t.row(k).transpose() / s;
            out.ger(1.0, &vk, &u.column(k), 1.0);
        }
    }
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    Ok((out, PinvInfo { rank, condition }))
}

/// Which path [`solve_small_spd`] took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveRoute {
    Cholesky,
    SvdFallback,
}

/// Solves `m x = rhs` for a small symmetric positive definite `m`.
///
/// Uses Cholesky when the factor's diagonal ratio squared (a cheap
/// condition estimate) stays below [`INNER_CONDITION_LIMIT`], otherwise a
/// pseudo-inverse with `rel_tol`.
pub fn solve_small_spd(m: DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> Result<(DVector<f64>, SolveRoute)> {
    if let Some(chol) = m.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        let estimate = (hi / lo).powi(2);
        if lo > 0.0 && estimate <= INNER_CONDITION_LIMIT {
            let x = chol.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, SolveRoute::Cholesky));
            }
        }
    }
    let (inv, _) = pinv(&m, rel_tol)?;
    let x = inv * rhs;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("inner solve produced non-finite values".into()));
    }
    Ok((x, SolveRoute::SvdFallback))
}
