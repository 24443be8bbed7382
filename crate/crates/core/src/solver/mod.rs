//! Tikhonov and interpretability-regularized kernel fits.
//!
//! Both fits search over `span{K(x_i, ·)}`; the objective only sees `f`
//! through its sample values and its RKHS norm, so the minimizer lives there.

mod decomposition;
mod objective;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use decomposition::{
    class_minimizer, error_decomposition, generalization_error, DecompositionReport,
};
pub use objective::{objective_value, InterpObjective};

use crate::descent::{self, DescentOptions};
use crate::error::{Error, Result};
use crate::kernel::{quadratic_form, Hypothesis, JitterPolicy, KernelSpec};
use crate::metric::empirical_metric;
use crate::task::{Dataset, PriorModel};

/// How the mean inside the interpretability term is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// `(1/m) Σ (f_i - p_i)`; keeps the objective a convex quadratic.
    #[default]
    Signed,
    /// `(1/m) Σ |f_i - p_i|`; only solvable by descent.
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    ClosedForm,
    Descent,
}

impl fmt::Display for MeanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanMode::Signed => "signed",
            MeanMode::Abs => "abs",
        })
    }
}

impl FromStr for MeanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(MeanMode::Signed),
            "abs" => Ok(MeanMode::Abs),
            other => Err(Error::invalid(format!("unknown mean mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// RKHS penalty weight.
    pub lambda: f64,
    /// Weight of the interpretability term; `1` is the unweighted objective.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub mean_mode: MeanMode,
    #[serde(default)]
    pub solver_mode: SolverMode,
}

fn default_tau() -> f64 {
    1.0
}

impl FitConfig {
    pub fn new(lambda: f64, tau: f64) -> Self {
        Self {
            lambda,
            tau,
            mean_mode: MeanMode::Signed,
            solver_mode: SolverMode::ClosedForm,
        }
    }

    pub fn with_solver(mut self, mode: SolverMode) -> Self {
        self.solver_mode = mode;
        self
    }

    pub fn with_mean(mut self, mode: MeanMode) -> Self {
        self.mean_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau must be finite and nonnegative"));
        }
        if self.mean_mode == MeanMode::Abs && self.solver_mode == SolverMode::ClosedForm {
            return Err(Error::invalid(
                "the abs mean mode has no closed form; use the descent solver",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hypothesis: Hypothesis,
    pub objective_value: f64,
    pub jitter_used: f64,
    /// Descent iterations; zero for closed-form fits.
    pub iterations: usize,
    pub converged: bool,
}

/// Summary of a fit as written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub lambda: f64,
    pub tau: f64,
    pub mean_mode: MeanMode,
    pub objective: f64,
    pub rkhs_norm_sq: f64,
    pub empirical_risk: f64,
    pub interp_variance: f64,
    pub jitter: f64,
    pub converged: bool,
}

impl FitSummary {
    pub const CSV_HEADER: &'static str =
        "lambda,tau,mean_mode,objective,rkhs_norm_sq,empirical_risk,interp_variance,jitter,converged";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.lambda,
            self.tau,
            self.mean_mode,
            self.objective,
            self.rkhs_norm_sq,
            self.empirical_risk,
            self.interp_variance,
            self.jitter,
            self.converged
        )
    }
}

impl FitResult {
    /// Empirical risk, empirical interpretability variance and RKHS norm of the fit.
    pub fn summarize(
        &self,
        dataset: &Dataset,
        prior: &PriorModel,
        config: &FitConfig,
    ) -> Result<FitSummary> {
        let h = &self.hypothesis;
        let f = h.evaluate_many(&dataset.xs)?;
        let p: Vec<f64> = dataset.xs.iter().map(|x| prior.eval(x)).collect();
        let risk = f
            .iter()
            .zip(&dataset.ys)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / dataset.m as f64;
        let metric = empirical_metric(&f, &p)?;
        let norm = quadratic_form(&h.kernel.matrix(&h.centers), &h.coeffs)?;
        Ok(FitSummary {
            lambda: config.lambda,
            tau: config.tau,
            mean_mode: config.mean_mode,
            objective: self.objective_value,
            rkhs_norm_sq: norm,
            empirical_risk: risk,
            interp_variance: metric.variance,
            jitter: self.jitter_used,
            converged: self.converged,
        })
    }

    /// Writes `index,center_0..,coeff` rows.
    pub fn coefficients_csv(&self) -> String {
        let h = &self.hypothesis;
        let dim = h.input_dim().unwrap_or(0);
        let mut out = String::from("index");
        for j in 0..dim {
            out.push_str(&format!(",center_{j}"));
        }
        out.push_str(",coeff\n");
        for (i, (c, a)) in h.centers.iter().zip(h.coeffs.iter()).enumerate() {
            out.push_str(&i.to_string());
            for v in c {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{a}\n"));
        }
        out
    }
}

/// Plain Tikhonov fit: solves `((1/m)K + λI) c = (1/m) y`.
pub fn fit_tikhonov(dataset: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<FitResult> {
    kernel.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite and nonnegative"));
    }
    let m = dataset.m as f64;
    let k = kernel.matrix(&dataset.xs);
    let mut a = &k / m;
    for i in 0..dataset.m {
        a[(i, i)] += lambda;
    }
    let (chol, jitter) = JitterPolicy::default().factor(&a)?;
    let c = chol.solve(&(DVector::from_column_slice(&dataset.ys) / m));
    let f = &k * &c;
    let objective =
        (&f - DVector::from_column_slice(&dataset.ys)).norm_squared() / m + lambda * c.dot(&f);
    Ok(FitResult {
        hypothesis: Hypothesis::new(c, dataset.xs.clone(), *kernel)?,
        objective_value: objective,
        jitter_used: jitter,
        iterations: 0,
        converged: true,
    })
}

/// Interpretability-regularized fit.
///
/// Minimizes `(1/m)Σ(f(x_i) - y_i)² + λ‖f‖²_K + τ(1/m)Σ(f(x_i) - P(x_i) - mean)²`.
/// The closed form solves the stationarity condition
/// `((1/m)K + (τ/m)CK + λI) c = (1/m)(y + τCp)`, `C = I - (1/m)𝟙𝟙ᵀ`, in its
/// equivalent symmetric form (see [`solve_weighted`]).
pub fn fit_interpretable(
    dataset: &Dataset,
    prior: &PriorModel,
    kernel: &KernelSpec,
    config: &FitConfig,
) -> Result<FitResult> {
    let objective = InterpObjective::new(dataset, prior, kernel, config)?;
    match config.solver_mode {
        SolverMode::ClosedForm => {
            let w = DVector::from_element(dataset.m, 1.0 / dataset.m as f64);
            let (c, jitter) = solve_weighted(
                objective.gram(),
                &DVector::from_column_slice(&dataset.ys),
                objective.prior_values(),
                &w,
                config.lambda,
                config.tau,
            )?;
            let value = objective.value(&c);
            Ok(FitResult {
                hypothesis: Hypothesis::new(c, dataset.xs.clone(), *kernel)?,
                objective_value: value,
                jitter_used: jitter,
                iterations: 0,
                converged: true,
            })
        }
        SolverMode::Descent => {
            let out = descent::minimize(
                &objective,
                DVector::zeros(dataset.m),
                &descent_options(config.lambda),
            );
            Ok(FitResult {
                hypothesis: Hypothesis::new(out.x, dataset.xs.clone(), *kernel)?,
                objective_value: out.value,
                jitter_used: 0.0,
                iterations: out.iterations,
                converged: out.converged,
            })
        }
    }
}

/// Options for descent in the RKHS metric. Directions in the null space of
/// `K` contract by `1 - 2λt` per step, so steps are capped at `1/(2λ)`.
pub fn descent_options(lambda: f64) -> DescentOptions {
    DescentOptions {
        max_step: if lambda > 0.0 { 0.5 / lambda } else { 1e6 },
        ..DescentOptions::default()
    }
}

/// Solves the weighted signed-mean problem
///
/// ```text
/// min_c Σ w_i (f_i - y_i)² + λ cᵀKc + τ Σ w_i (f_i - p_i - Σ_j w_j (f_j - p_j))²,  f = Kc
/// ```
///
/// for a positive probability vector `w`. Stationarity reads
/// `(BK + λI) c = W y + τ(W - wwᵀ) p` with `B = (1+τ)W - τwwᵀ`; multiplying by
/// `B⁻¹ = W⁻¹/(1+τ) + τ/(1+τ)·𝟙𝟙ᵀ` gives the symmetric positive definite system
///
/// ```text
/// (K + λB⁻¹) c = (y + τ(p - (wᵀp)𝟙)) / (1+τ) + τ/(1+τ)·(wᵀy)·𝟙
/// ```
///
/// which is scaled by `1/n` before factoring so that, for uniform weights, it
/// coincides with `(1/m)K + λ(I + τC)⁻¹`. Returns the coefficients and the
/// jitter used.
pub fn solve_weighted(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    tau: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n || p.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows().min(p.len()).min(w.len()),
        });
    }
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("weights must be strictly positive"));
    }
    let scale = 1.0 / n as f64;
    let shrink = 1.0 / (1.0 + tau);
    let share = tau * shrink;
    let mut q = k * scale;
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] += scale * lambda * share;
        }
        q[(i, i)] += scale * lambda * shrink / w[i];
    }
    let wp = w.dot(p);
    let wy = w.dot(y);
    let rhs = (y + p.map(|v| tau * (v - wp))) * (scale * shrink)
        + DVector::from_element(n, scale * share * wy);
    let (chol, jitter) = JitterPolicy::default().factor(&q)?;
    Ok((chol.solve(&rhs), jitter))
}

/// Result of a fit constrained to an RKHS ball.
#[derive(Debug, Clone)]
pub struct BallFit {
    pub fit: FitResult,
    /// Penalty weight that put the fit inside the ball (`>=` the configured one).
    pub lambda_used: f64,
    pub norm: f64,
}

/// Closed-form fit restricted to `‖f‖_K <= radius`.
///
/// The unconstrained fit at the configured `λ` is returned when it already
/// lies in the ball; otherwise `λ` is raised by bisection on `log λ` until the
/// norm meets the radius from inside.
pub fn fit_in_ball(
    dataset: &Dataset,
    prior: &PriorModel,
    kernel: &KernelSpec,
    config: &FitConfig,
    radius: f64,
) -> Result<BallFit> {
    if !(radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    let cfg = FitConfig {
        solver_mode: SolverMode::ClosedForm,
        ..*config
    };
    let objective = InterpObjective::new(dataset, prior, kernel, &cfg)?;
    let y = DVector::from_column_slice(&dataset.ys);
    let w = DVector::from_element(dataset.m, 1.0 / dataset.m as f64);
    let solve = |lambda: f64| -> Result<(DVector<f64>, f64, f64)> {
        let (c, jitter) = solve_weighted(
            objective.gram(),
            &y,
            objective.prior_values(),
            &w,
            lambda,
            cfg.tau,
        )?;
        let norm = quadratic_form(objective.gram(), &c)?.sqrt();
        Ok((c, jitter, norm))
    };
    let finish = |lambda: f64, (c, jitter, norm): (DVector<f64>, f64, f64)| -> Result<BallFit> {
        let with_lambda = InterpObjective {
            lambda,
            ..objective.clone()
        };
        Ok(BallFit {
            fit: FitResult {
                objective_value: with_lambda.value(&c),
                hypothesis: Hypothesis::new(c, dataset.xs.clone(), *kernel)?,
                jitter_used: jitter,
                iterations: 0,
                converged: true,
            },
            lambda_used: lambda,
            norm,
        })
    };

    let base = solve(cfg.lambda)?;
    if base.2 <= radius {
        return finish(cfg.lambda, base);
    }
    let mut lo = cfg.lambda;
    let mut hi = (cfg.lambda * 10.0).max(1e-12);
    let mut hi_sol = solve(hi)?;
    while hi_sol.2 > radius {
        lo = hi;
        hi *= 10.0;
        if hi > 1e15 {
            return Err(Error::Domain(format!(
                "no penalty weight brings the fit inside radius {radius}"
            )));
        }
        hi_sol = solve(hi)?;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        let sol = solve(mid)?;
        if sol.2 > radius {
            lo = mid;
        } else {
            hi = mid;
            hi_sol = sol;
        }
    }
    finish(hi, hi_sol)
}
