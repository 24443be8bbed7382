//! Catalog of evaluable real functions on `R^n`.
//!
//! Regression functions and prior models are described declaratively so a
//! task can be read from a JSON config and reproduced exactly.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Anything that can be evaluated at a point of the input domain.
pub trait RealFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F> RealFunction for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// A function from the built-in catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `bias + Σ weights[j]·x_j`; missing weights count as zero.
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        bias: f64,
    },
    /// `Σ coeffs[k]·x_axis^k`.
    Polynomial {
        #[serde(default)]
        axis: usize,
        coeffs: Vec<f64>,
    },
    /// `amplitude·sin(2π·frequency·x_axis + phase)`.
    Sinusoid {
        #[serde(default)]
        axis: usize,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear interpolation through `knots` (sorted by abscissa), constant
    /// beyond the end knots.
    PiecewiseLinear {
        #[serde(default)]
        axis: usize,
        knots: Vec<[f64; 2]>,
    },
    /// `amplitude·exp(-‖x - center‖² / (2·width²))`.
    Bump {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
    },
    /// Nearest-neighbour lookup in a table of points.
    Tabulated {
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
    Sum {
        terms: Vec<FunctionSpec>,
    },
}

impl FunctionSpec {
    /// Checks parameters against the input dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_axis = |axis: usize| {
            if axis >= dim {
                Err(Error::invalid(format!(
                    "axis {axis} out of range for dimension {dim}"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            FunctionSpec::Zero | FunctionSpec::Constant { .. } => Ok(()),
            FunctionSpec::Linear { weights, .. } => {
                if weights.len() > dim {
                    return Err(Error::invalid("linear weights longer than dimension"));
                }
                Ok(())
            }
            FunctionSpec::Polynomial { axis, coeffs } => {
                check_axis(*axis)?;
                if coeffs.is_empty() {
                    return Err(Error::invalid("polynomial needs at least one coefficient"));
                }
                Ok(())
            }
            FunctionSpec::Sinusoid { axis, .. } => check_axis(*axis),
            FunctionSpec::PiecewiseLinear { axis, knots } => {
                check_axis(*axis)?;
                if knots.is_empty() {
                    return Err(Error::invalid("piecewise-linear needs at least one knot"));
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::invalid("knots must be strictly increasing"));
                }
                Ok(())
            }
            FunctionSpec::Bump { center, width, .. } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: center.len(),
                    });
                }
                if !(*width > 0.0) {
                    return Err(Error::invalid("bump width must be positive"));
                }
                Ok(())
            }
            FunctionSpec::Tabulated { points, values } => {
                if points.is_empty() || points.len() != values.len() {
                    return Err(Error::invalid(
                        "tabulated points and values must be nonempty and aligned",
                    ));
                }
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.len(),
                    });
                }
                Ok(())
            }
            FunctionSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate(dim)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Zero => 0.0,
            FunctionSpec::Constant { value } => *value,
            FunctionSpec::Linear { weights, bias } => {
                bias + weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
            }
            FunctionSpec::Polynomial { axis, coeffs } => {
                let t = x[*axis];
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            FunctionSpec::Sinusoid {
                axis,
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * x[*axis] + phase).sin(),
            FunctionSpec::PiecewiseLinear { axis, knots } => piecewise_linear(knots, x[*axis]),
            FunctionSpec::Bump {
                center,
                width,
                amplitude,
            } => {
                let d2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c).powi(2)).sum();
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            FunctionSpec::Tabulated { points, values } => {
                let mut best = (f64::INFINITY, 0.0);
                for (p, v) in points.iter().zip(values) {
                    let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                    if d2 < best.0 {
                        best = (d2, *v);
                    }
                }
                best.1
            }
            FunctionSpec::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    /// Estimate of `sup |f|`: exact for constants and sinusoids, otherwise the
    /// maximum over `samples`.
    pub fn sup_abs_on(&self, samples: &[Vec<f64>]) -> f64 {
        match self {
            FunctionSpec::Zero => 0.0,
            FunctionSpec::Constant { value } => value.abs(),
            FunctionSpec::Sinusoid { amplitude, .. } => amplitude.abs(),
            _ => samples
                .iter()
                .map(|x| self.eval(x).abs())
                .fold(0.0, f64::max),
        }
    }
}

impl RealFunction for FunctionSpec {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

fn piecewise_linear(knots: &[[f64; 2]], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    let idx = knots.partition_point(|k| k[0] <= t);
    let [x0, y0] = knots[idx - 1];
    let [x1, y1] = knots[idx];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}
