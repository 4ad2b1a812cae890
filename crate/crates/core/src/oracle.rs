//! Brute-force weighted least squares used as a reference.
//!
//! Works on plain row-major `Vec<f64>` storage and its own one-sided Jacobi
//! SVD; it shares no code with the trainer or adapter. Slow by design of
//! the algorithm, not tuned.
//!
//! `β = pinv(Hᵀ W H) · Hᵀ W T`, singular values of `Hᵀ W H` below
//! `tol · σ_max` discarded.

use crate::error::{Error, Result};

pub const ORACLE_TOLERANCE: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// `H`, the diagonal of `W`, and `T` of one weighted least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedSystem {
    pub h: Dense,
    pub w: Vec<f64>,
    pub t: Vec<f64>,
}

impl StackedSystem {
    pub fn new(h: Dense, w: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if w.len() != h.rows {
            return Err(Error::DimensionMismatch { expected: h.rows, actual: w.len() });
        }
        if t.len() != h.rows {
            return Err(Error::DimensionMismatch { expected: h.rows, actual: t.len() });
        }
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::arg("oracle weights must be finite and > 0"));
        }
        Ok(Self { h, w, t })
    }

    pub fn rows(&self) -> usize {
        self.h.rows
    }

    /// `Σ wᵢ (tᵢ − hᵢ·β)²`.
    pub fn weighted_sse(&self, beta: &[f64]) -> f64 {
        (0..self.rows())
            .map(|i| {
                let fit: f64 = self.h.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
                self.w[i] * (self.t[i] - fit).powi(2)
            })
            .sum()
    }
}

/// Vertical concatenation of an offline block and a ring block.
pub fn stack(offline: &StackedSystem, ring: &StackedSystem) -> Result<StackedSystem> {
    if ring.rows() == 0 {
        return Ok(offline.clone());
    }
    if offline.h.cols != ring.h.cols {
        return Err(Error::DimensionMismatch { expected: offline.h.cols, actual: ring.h.cols });
    }
    let mut data = offline.h.data.clone();
    data.extend_from_slice(&ring.h.data);
    let h = Dense::from_row_major(offline.rows() + ring.rows(), offline.h.cols, data)?;
    let w = offline.w.iter().chain(&ring.w).copied().collect();
    let t = offline.t.iter().chain(&ring.t).copied().collect();
    StackedSystem::new(h, w, t)
}

/// Solves the weighted normal equations through a Jacobi-SVD pseudo-inverse.
pub fn batch_weighted_ls(sys: &StackedSystem) -> Result<Vec<f64>> {
    batch_weighted_ls_tol(sys, ORACLE_TOLERANCE)
}

pub fn batch_weighted_ls_tol(sys: &StackedSystem, tol: f64) -> Result<Vec<f64>> {
    let p = sys.h.cols;
    let mut gram = Dense::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for i in 0..sys.rows() {
        let row = sys.h.row(i);
        let w = sys.w[i];
        for a in 0..p {
            let wa = w * row[a];
            rhs[a] += wa * sys.t[i];
            for b in 0..p {
                *gram.at_mut(a, b) += wa * row[b];
            }
        }
    }
    let inv = jacobi_pinv(&gram, tol)?;
    Ok((0..p).map(|a| (0..p).map(|b| inv.at(a, b) * rhs[b]).sum()).collect())
}

/// Singular values, right singular vectors (columns of `v`, `n × n`) and the
/// rotated columns `U Σ` (`m × n`) of a one-sided Jacobi sweep.
pub struct JacobiSvd {
    pub sigma: Vec<f64>,
    pub v: Dense,
    pub u_sigma: Dense,
}

pub fn jacobi_svd(a: &Dense) -> Result<JacobiSvd> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("oracle input not finite".into()));
    }
    let (m, n) = (a.rows, a.cols);
    let mut u = a.clone();
    let mut v = Dense::zeros(n, n);
    for i in 0..n {
        *v.at_mut(i, i) = 1.0;
    }
    let mut converged = false;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (up, uq) = (u.at(i, p), u.at(i, q));
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u.at(i, p), u.at(i, q));
                    *u.at_mut(i, p) = c * up - s * uq;
                    *u.at_mut(i, q) = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v.at(i, p), v.at(i, q));
                    *v.at_mut(i, p) = c * vp - s * vq;
                    *v.at_mut(i, q) = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("Jacobi SVD did not converge".into()));
    }
    let sigma = (0..n).map(|j| (0..m).map(|i| u.at(i, j).powi(2)).sum::<f64>().sqrt()).collect();
    Ok(JacobiSvd { sigma, v, u_sigma: u })
}

/// Pseudo-inverse `Σ_j v_j u_jᵀ / σ_j` over singular values above `tol · σ_max`.
pub fn jacobi_pinv(a: &Dense, tol: f64) -> Result<Dense> {
    let svd = jacobi_svd(a)?;
    let s_max = svd.sigma.iter().copied().fold(0.0, f64::max);
    let mut out = Dense::zeros(a.cols, a.rows);
    for (j, &s) in svd.sigma.iter().enumerate() {
        if s <= tol * s_max || s == 0.0 {
            continue;
        }
        // u_sigma column j is σ_j u_j, hence the σ²
        let scale = 1.0 / (s * s);
        for r in 0..a.cols {
            let vr = svd.v.at(r, j) * scale;
            if vr == 0.0 {
                continue;
            }
            for c in 0..a.rows {
                *out.at_mut(r, c) += vr * svd.u_sigma.at(c, j);
            }
        }
    }
    Ok(out)
}
