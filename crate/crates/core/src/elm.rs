//! Random-feature machinery shared by training and adaptation.
//!
//! The hidden layer has no bias: neuron `i` responds to a scaled input row
//! `x` with `G(x · a_i)`, where `a_i` is column `i` of a fixed Gaussian
//! input-weight matrix and `G(y) = 1 / (1 + exp(y))`. Note the sign: `G` is
//! decreasing in `y`.
//!
//! Hidden matrices are laid out sample-by-neuron (`n × Ñ`).

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

/// Seed used for the input weights when none is given.
pub const DEFAULT_SEED: u64 = 7_898_198;
/// Hidden layer width when none is given.
pub const DEFAULT_NEURONS: usize = 64;

/// Logistic activation without the conventional negation: `1 / (1 + e^y)`.
#[inline]
pub fn logistic_exact(y: f64) -> f64 {
    1.0 / (1.0 + y.exp())
}

/// Rational (3,3) Padé approximant of `exp(y)`.
#[inline]
pub fn pade_exp(y: f64) -> f64 {
    let y2 = y * y;
    let even = 120.0 + 12.0 * y2;
    let odd = y * (60.0 + y2);
    (even + odd) / (even - odd)
}

/// `1 / (1 + pade_exp(y))`, evaluated in the closed form
/// `((120 + 12y²) - 60y - y³) / (2 (120 + 12y²))`.
///
/// Agrees with [`logistic_exact`] to 2e-4 on `|y| <= 2` and 2e-3 on
/// `|y| <= 3`; it leaves `(0, 1)` past `|y| ≈ 4.64`.
#[inline]
pub fn logistic_pade(y: f64) -> f64 {
    let y2 = y * y;
    let even = 120.0 + 12.0 * y2;
    let odd = y * (60.0 + y2);
    (even - odd) / (2.0 * even)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    Exact,
    #[default]
    Pade,
}

impl Activation {
    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Exact => logistic_exact(y),
            Activation::Pade => logistic_pade(y),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Exact => 0,
            Activation::Pade => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Exact),
            1 => Some(Activation::Pade),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Activation::Exact),
            "pade" => Ok(Activation::Pade),
            other => Err(Error::arg(format!("unknown activation `{other}` (exact|pade)"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Exact => "exact",
            Activation::Pade => "pade",
        })
    }
}

/// The fixed `z × Ñ` input-weight matrix; column `i` is neuron `i`'s weights.
#[derive(Clone, Debug, PartialEq)]
pub struct InputWeights {
    seed: u64,
    matrix: DMatrix<f64>,
}

impl InputWeights {
    /// Draws `z × n_neurons` standard normals from [`SeededRng`], one neuron
    /// (column) at a time.
    pub fn generate(seed: u64, z: usize, n_neurons: usize) -> Result<Self> {
        if z == 0 || n_neurons == 0 {
            return Err(Error::arg("input weights need z >= 1 and n_neurons >= 1"));
        }
        let mut rng = SeededRng::new(seed);
        let mut matrix = DMatrix::zeros(z, n_neurons);
        for i in 0..n_neurons {
            for j in 0..z {
                matrix[(j, i)] = rng.normal();
            }
        }
        Ok(Self { seed, matrix })
    }

    pub(crate) fn from_parts(seed: u64, matrix: DMatrix<f64>) -> Self {
        Self { seed, matrix }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of input features `z`.
    pub fn z(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_neurons(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Writes the activations of one scaled row into `out` (length `Ñ`).
    #[inline]
    pub fn hidden_row_into(&self, x_scaled: &[f64], activation: Activation, out: &mut [f64]) {
        debug_assert_eq!(x_scaled.len(), self.z());
        debug_assert_eq!(out.len(), self.n_neurons());
        for (i, slot) in out.iter_mut().enumerate() {
            let column = self.matrix.column(i);
            let y: f64 = column.iter().zip(x_scaled).map(|(a, x)| a * x).sum();
            *slot = activation.apply(y);
        }
    }
}

/// Activations of one scaled input row.
pub fn hidden_row(w: &InputWeights, x_scaled: &[f64], activation: Activation) -> Result<DVector<f64>> {
    check_len(w.z(), x_scaled.len())?;
    let mut out = DVector::zeros(w.n_neurons());
    w.hidden_row_into(x_scaled, activation, out.as_mut_slice());
    Ok(out)
}

/// Row-wise [`hidden_row`] over an `n × z` matrix of scaled inputs.
pub fn hidden_matrix(w: &InputWeights, x_scaled: &DMatrix<f64>, activation: Activation) -> Result<DMatrix<f64>> {
    check_len(w.z(), x_scaled.ncols())?;
    let n = x_scaled.nrows();
    let mut h = DMatrix::zeros(n, w.n_neurons());
    let mut row = vec![0.0; w.z()];
    let mut out = vec![0.0; w.n_neurons()];
    for k in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x_scaled[(k, j)];
        }
        w.hidden_row_into(&row, activation, &mut out);
        for (i, v) in out.iter().enumerate() {
            h[(k, i)] = *v;
        }
    }
    Ok(h)
}
