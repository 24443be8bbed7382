//! Cosine-type orthonormal basis on a weighted midpoint grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::task::check_probability_vector;

/// Orthonormal basis of functions on the grid `x_j = (j + 1/2)/N` under the
/// inner product `⟨u, v⟩ = Σ_j w_j u(x_j) v(x_j)`.
///
/// Built by weighted Gram-Schmidt on `cos(kπx)`, `k = 0..N`, so the first
/// element is the constant function 1. Coefficient Euclidean norms equal
/// weighted function norms.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    points: Vec<f64>,
    weights: DVector<f64>,
    /// `phi[(j, k)]` is the value of basis function `k` at grid point `j`.
    phi: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn new(weights: &[f64]) -> Result<Self> {
        check_probability_vector(weights)?;
        let n = weights.len();
        if n == 0 {
            return Err(Error::invalid("basis needs at least one grid point"));
        }
        if weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::invalid("basis weights must be strictly positive"));
        }
        let points: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect();
        let w = DVector::from_column_slice(weights);
        let mut phi = DMatrix::from_fn(n, n, |j, k| {
            (k as f64 * std::f64::consts::PI * points[j]).cos()
        });
        let inner = |u: &DVector<f64>, v: &DVector<f64>| u.component_mul(v).dot(&w);
        for k in 0..n {
            let mut v: DVector<f64> = phi.column(k).into_owned();
            // two passes keep the columns orthogonal to rounding
            for _ in 0..2 {
                for i in 0..k {
                    let qi: DVector<f64> = phi.column(i).into_owned();
                    let proj = inner(&v, &qi);
                    v -= qi * proj;
                }
            }
            let norm = inner(&v, &v).sqrt();
            if !(norm > 1e-12) {
                return Err(Error::Singular(format!("basis function {k} is degenerate")));
            }
            phi.set_column(k, &(v / norm));
        }
        Ok(Self {
            points,
            weights: w,
            phi,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Grid values of the function with coefficients `b`.
    pub fn values(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.phi * b
    }

    /// Coefficients of the grid function `v`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.phi.transpose() * v.component_mul(&self.weights)
    }

    /// `∫ f dρ` for the function with coefficients `b`.
    pub fn integral(&self, b: &DVector<f64>) -> f64 {
        self.values(b).dot(&self.weights)
    }

    /// Weighted squared norm `Σ_j w_j v_j²` of grid values.
    pub fn norm_sq_values(&self, v: &DVector<f64>) -> f64 {
        v.component_mul(v).dot(&self.weights)
    }

    /// The row vector `u` with `∫ f dρ = uᵀb`.
    pub fn mean_functional(&self) -> DVector<f64> {
        self.project(&DVector::from_element(self.dim(), 1.0))
    }
}
