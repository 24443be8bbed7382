//! Interpretability metric: mean and variance of the gap `f(x) - P(x)`.
//!
//! The population form integrates against quadrature nodes of the input
//! measure; the empirical form averages over the sample.

use std::fmt;

use crate::error::{Error, Result};
use crate::function::RealFunction;
use crate::task::{Node, PriorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricForm {
    Population,
    Empirical,
}

impl fmt::Display for MetricForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricForm::Population => "population",
            MetricForm::Empirical => "empirical",
        })
    }
}

/// Mean error `μ^P(f)` and error variance `ℰ^P(f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mean_error: f64,
    pub variance: f64,
    pub form: MetricForm,
    pub node_count: usize,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "form,mean_error,variance,node_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.form, self.mean_error, self.variance, self.node_count
        )
    }
}

fn weighted_moments(errors: &[f64], weights: impl Fn(usize) -> f64) -> (f64, f64) {
    let mean: f64 = errors.iter().enumerate().map(|(i, e)| weights(i) * e).sum();
    let var: f64 = errors
        .iter()
        .enumerate()
        .map(|(i, e)| weights(i) * (e - mean) * (e - mean))
        .sum();
    (mean, var.max(0.0))
}

/// Sample mean and variance of `f_vals - p_vals`.
pub fn empirical_metric(f_vals: &[f64], p_vals: &[f64]) -> Result<MetricReport> {
    if f_vals.is_empty() || f_vals.len() != p_vals.len() {
        return Err(Error::DimensionMismatch {
            expected: f_vals.len(),
            found: p_vals.len(),
        });
    }
    let errors: Vec<f64> = f_vals.iter().zip(p_vals).map(|(f, p)| f - p).collect();
    if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFinite {
            what: "empirical metric entry",
            point: vec![i as f64],
            value: errors[i],
        });
    }
    let m = errors.len();
    let inv = 1.0 / m as f64;
    let (mean_error, variance) = weighted_moments(&errors, |_| inv);
    Ok(MetricReport {
        mean_error,
        variance,
        form: MetricForm::Empirical,
        node_count: m,
    })
}

/// Weighted mean and variance of `f - prior` over quadrature nodes.
pub fn population_metric<F: RealFunction + ?Sized>(
    f: &F,
    prior: &PriorModel,
    nodes: &[Node],
) -> Result<MetricReport> {
    if nodes.is_empty() {
        return Err(Error::invalid("population metric needs at least one node"));
    }
    let mut errors = Vec::with_capacity(nodes.len());
    for node in nodes {
        let fv = f.value(&node.point);
        if !fv.is_finite() {
            return Err(Error::NonFinite {
                what: "model",
                point: node.point.clone(),
                value: fv,
            });
        }
        let pv = prior.eval(&node.point);
        if !pv.is_finite() {
            return Err(Error::NonFinite {
                what: "prior",
                point: node.point.clone(),
                value: pv,
            });
        }
        errors.push(fv - pv);
    }
    let (mean_error, variance) = weighted_moments(&errors, |i| nodes[i].weight);
    Ok(MetricReport {
        mean_error,
        variance,
        form: MetricForm::Population,
        node_count: nodes.len(),
    })
}
