//! Percentile saturation scaling to `[0, 1]`.
//!
//! Each column is clipped to its `[p_low, p_high]` percentile values and
//! mapped linearly onto the unit interval. Percentiles use linear
//! interpolation between closest ranks (rank `p/100 · (n-1)`).

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

pub const DEFAULT_P_LOW: f64 = 0.1;
pub const DEFAULT_P_HIGH: f64 = 99.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ColumnBounds {
    #[inline]
    pub fn scale(&self, v: f64) -> f64 {
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    /// Maps a unit-interval value back to column units; not clamped.
    #[inline]
    pub fn unscale(&self, s: f64) -> f64 {
        self.lo + s * (self.hi - self.lo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    bounds: Vec<ColumnBounds>,
    p_low: f64,
    p_high: f64,
}

/// Linear-interpolation percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let below = rank.floor() as usize;
    let above = rank.ceil() as usize;
    let frac = rank - below as f64;
    sorted[below] + frac * (sorted[above] - sorted[below])
}

impl Scaler {
    /// Fits per-column bounds on the columns of an `n × k` matrix.
    pub fn fit(columns: &DMatrix<f64>, p_low: f64, p_high: f64) -> Result<Self> {
        if !(0.0..100.0).contains(&p_low) || !(p_low < p_high && p_high <= 100.0) {
            return Err(Error::arg(format!(
                "percentiles must satisfy 0 <= p_low < p_high <= 100 (got {p_low}, {p_high})"
            )));
        }
        if columns.nrows() < 2 {
            return Err(Error::arg("scaler needs at least two rows per column"));
        }
        let mut bounds = Vec::with_capacity(columns.ncols());
        for (c, col) in columns.column_iter().enumerate() {
            let mut sorted: Vec<f64> = col.iter().copied().collect();
            if sorted.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("scaler input"));
            }
            sorted.sort_by(f64::total_cmp);
            let lo = percentile(&sorted, p_low);
            let hi = percentile(&sorted, p_high);
            if lo >= hi {
                return Err(Error::DegenerateColumn { column: c });
            }
            bounds.push(ColumnBounds { lo, hi });
        }
        Ok(Self { bounds, p_low, p_high })
    }

    pub fn from_bounds(bounds: Vec<ColumnBounds>, p_low: f64, p_high: f64) -> Result<Self> {
        for (c, b) in bounds.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite()) {
                return Err(Error::NonFinite("scaler bounds"));
            }
            if b.lo >= b.hi {
                return Err(Error::DegenerateColumn { column: c });
            }
        }
        Ok(Self { bounds, p_low, p_high })
    }

    /// Pass-through scaler (`lo = 0`, `hi = 1`) for data already in the unit interval.
    pub fn identity(arity: usize) -> Self {
        Self {
            bounds: vec![ColumnBounds { lo: 0.0, hi: 1.0 }; arity],
            p_low: 0.0,
            p_high: 100.0,
        }
    }

    pub fn arity(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[ColumnBounds] {
        &self.bounds
    }

    pub fn percentiles(&self) -> (f64, f64) {
        (self.p_low, self.p_high)
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arity()];
        self.apply_into(row, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.arity(), row.len())?;
        check_len(self.arity(), out.len())?;
        for ((o, v), b) in out.iter_mut().zip(row).zip(&self.bounds) {
            *o = b.scale(*v);
        }
        Ok(())
    }

    /// Inverse map for values inside the unit interval.
    pub fn invert(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        check_len(self.arity(), scaled.len())?;
        Ok(scaled.iter().zip(&self.bounds).map(|(s, b)| b.unscale(*s)).collect())
    }

    /// Scales every row of an `n × k` matrix.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len(self.arity(), m.ncols())?;
        Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| self.bounds[c].scale(m[(r, c)])))
    }
}
