//! The regularized objective in representer coordinates.
//!
//! With `f = K c` on the sample,
//!
//! ```text
//! J(c) = (1/m)‖Kc - y‖² + λ cᵀKc + τ (1/m) Σ (f_i - p_i - mean)²
//! ```
//!
//! where `mean` is the signed mean of `f - p` or, in `Abs` mode, the mean of
//! `|f - p|`.

use nalgebra::{DMatrix, DVector};

use super::{FitConfig, MeanMode};
use crate::descent::SmoothProblem;
use crate::error::{Error, Result};
use crate::kernel::{Hypothesis, KernelSpec};
use crate::task::{Dataset, PriorModel};

/// The objective for a fixed dataset, prior and kernel, with the centers
/// placed at the sample points.
#[derive(Debug, Clone)]
pub struct InterpObjective {
    pub(crate) k: DMatrix<f64>,
    pub(crate) y: DVector<f64>,
    pub(crate) p: DVector<f64>,
    pub(crate) lambda: f64,
    pub(crate) tau: f64,
    pub(crate) mode: MeanMode,
}

impl InterpObjective {
    pub fn new(
        dataset: &Dataset,
        prior: &PriorModel,
        kernel: &KernelSpec,
        config: &FitConfig,
    ) -> Result<Self> {
        config.validate()?;
        kernel.validate()?;
        let p = prior_values(dataset, prior)?;
        Ok(Self {
            k: kernel.matrix(&dataset.xs),
            y: DVector::from_column_slice(&dataset.ys),
            p,
            lambda: config.lambda,
            tau: config.tau,
            mode: config.mean_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn prior_values(&self) -> &DVector<f64> {
        &self.p
    }

    fn m(&self) -> f64 {
        self.y.len() as f64
    }

    /// Objective value from predictions `f = Kc` and the quadratic form `cᵀKc`.
    fn value_from(&self, f: &DVector<f64>, norm_sq: f64) -> f64 {
        let m = self.m();
        let risk = (f - &self.y).norm_squared() / m;
        let e = f - &self.p;
        let center = match self.mode {
            MeanMode::Signed => e.sum() / m,
            MeanMode::Abs => e.iter().map(|v| v.abs()).sum::<f64>() / m,
        };
        let spread = e.iter().map(|v| (v - center) * (v - center)).sum::<f64>() / m;
        risk + self.lambda * norm_sq + self.tau * spread
    }

    /// Gradient of the data and interpretability terms with respect to `f`.
    fn prediction_gradient(&self, f: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let e = f - &self.p;
        let ebar = e.sum() / m;
        let interp = match self.mode {
            MeanMode::Signed => e.map(|v| v - ebar),
            MeanMode::Abs => {
                let a = e.iter().map(|v| v.abs()).sum::<f64>() / m;
                e.map(|v| {
                    let sign = if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    v - a - sign * (ebar - a)
                })
            }
        };
        (f - &self.y) * (2.0 / m) + interp * (2.0 * self.tau / m)
    }

    pub fn value(&self, c: &DVector<f64>) -> f64 {
        let f = &self.k * c;
        let norm_sq = c.dot(&f);
        self.value_from(&f, norm_sq)
    }

    /// Euclidean gradient `∂J/∂c`.
    pub fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.k * self.rkhs_gradient(c)
    }

    /// Gradient in the RKHS metric, i.e. the coefficients of the Fréchet
    /// derivative of `J` as an element of `span{K(x_i, ·)}`.
    pub fn rkhs_gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let f = &self.k * c;
        self.prediction_gradient(&f) + c * (2.0 * self.lambda)
    }

    /// Hessian `∂²J/∂c²`; only defined for the signed mean.
    pub fn hessian(&self) -> Option<DMatrix<f64>> {
        if self.mode != MeanMode::Signed {
            return None;
        }
        let m = self.m();
        let n = self.dim();
        let centering = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / m);
        let inner = (DMatrix::identity(n, n) + centering * self.tau) / m;
        let h = (&self.k * inner * &self.k + &self.k * self.lambda) * 2.0;
        Some((&h + h.transpose()) * 0.5)
    }
}

/// Steepest descent in the RKHS metric.
impl SmoothProblem for InterpObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        InterpObjective::value(self, x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.rkhs_gradient(x)
    }

    fn descent_slope(&self, _x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        -g.dot(&(&self.k * g))
    }
}

pub(crate) fn prior_values(dataset: &Dataset, prior: &PriorModel) -> Result<DVector<f64>> {
    let mut p = DVector::zeros(dataset.m);
    for (i, x) in dataset.xs.iter().enumerate() {
        let v = prior.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "prior",
                point: x.clone(),
                value: v,
            });
        }
        p[i] = v;
    }
    Ok(p)
}

/// Value of the configured objective for an arbitrary hypothesis.
///
/// The hypothesis is evaluated at the sample inputs and its norm is taken
/// over its own centers, so it need not be centered on the dataset.
pub fn objective_value(
    h: &Hypothesis,
    dataset: &Dataset,
    prior: &PriorModel,
    config: &FitConfig,
) -> Result<f64> {
    config.validate()?;
    if let Some(dim) = h.input_dim() {
        if dim != dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: dataset.dim(),
                found: dim,
            });
        }
    }
    let f = DVector::from_vec(h.evaluate_many(&dataset.xs)?);
    let k = h.kernel.matrix(&h.centers);
    let norm_sq = crate::kernel::quadratic_form(&k, &h.coeffs)?;
    let p = prior_values(dataset, prior)?;
    let proxy = InterpObjective {
        k: DMatrix::zeros(0, 0),
        y: DVector::from_column_slice(&dataset.ys),
        p,
        lambda: config.lambda,
        tau: config.tau,
        mode: config.mean_mode,
    };
    Ok(proxy.value_from(&f, norm_sq))
}
