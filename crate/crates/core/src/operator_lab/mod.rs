//! Truncated compact-operator setting for the approximation-error bounds.
//!
//! `A` is diagonal with eigenvalues `μ_k` in an orthonormal basis whose first
//! element is the constant function (see [`SpectralBasis`]). The centering
//! operator `ℒ = Id - Γ` subtracts the `ρ`-mean, and the penalized problem
//!
//! ```text
//! min_b ‖b - a‖² + τ‖ℒ(b - p)‖² + γ‖A^{-s} b‖²
//! ```
//!
//! has the minimizer `b̂ = (Id + τℒ² + γA^{-2s})⁻¹(a + τℒ²p)`.
//!
//! Wherever `(1 + τℒ²)` appears inside a scalar power it is read as
//! `1 + τ‖ℒ‖²_op`.

mod basis;
mod fuzz;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use basis::SpectralBasis;
pub use fuzz::{fuzz_reports, random_instance, FuzzRegime};

use crate::error::{Error, Result};
use crate::task::check_probability_vector;

/// Relative residual accepted from the linear solve for `b̂`.
pub const SOLVE_RTOL: f64 = 1e-10;
/// Slack in the `functional <= bound` comparison.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralInstance {
    pub dim: usize,
    /// Eigenvalues of `A`, positive and nonincreasing.
    pub a_eigs: Vec<f64>,
    /// Discrete measure `ρ` on the grid.
    pub weights: Vec<f64>,
    pub a_vec: Vec<f64>,
    pub p_vec: Vec<f64>,
    pub s: f64,
    pub r: f64,
    pub tau: f64,
    /// `γ = 0` is accepted: `Id + τℒ² + γA^{-2s}` stays invertible.
    pub gamma: f64,
    #[serde(rename = "radius_R")]
    pub radius_r: f64,
}

impl SpectralInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        for (len, what) in [
            (self.a_eigs.len(), "a_eigs"),
            (self.weights.len(), "weights"),
            (self.a_vec.len(), "a_vec"),
            (self.p_vec.len(), "p_vec"),
        ] {
            if len != n {
                return Err(Error::invalid(format!(
                    "{what} has length {len}, expected {n}"
                )));
            }
        }
        if self.a_eigs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("a_eigs must be positive and finite"));
        }
        if self.a_eigs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("a_eigs must be nonincreasing"));
        }
        check_probability_vector(&self.weights)?;
        if self.a_vec.iter().chain(&self.p_vec).any(|v| !v.is_finite()) {
            return Err(Error::invalid("a_vec and p_vec must be finite"));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::invalid("s must be positive"));
        }
        if !(self.r > 0.0 && self.r <= self.s) {
            return Err(Error::invalid(format!(
                "need 0 < r <= s, got r = {}, s = {}",
                self.r, self.s
            )));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau must be finite and nonnegative"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be finite and nonnegative"));
        }
        if !(self.radius_r > 0.0) || !self.radius_r.is_finite() {
            return Err(Error::invalid("radius_R must be positive"));
        }
        Ok(())
    }

    pub fn a(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.a_vec)
    }

    pub fn p(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.p_vec)
    }

    /// Diagonal of `A^{-t}`.
    pub fn a_power(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.a_eigs.iter().map(|m| m.powf(-t)))
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }
}

/// `ℒ = Id - e₀uᵀ` where `uᵀb = ∫ b dρ` in the basis built on `weights`.
pub fn centering_operator(weights: &[f64]) -> Result<DMatrix<f64>> {
    let basis = SpectralBasis::new(weights)?;
    let n = basis.dim();
    let u = basis.mean_functional();
    let mut l = DMatrix::identity(n, n);
    for k in 0..n {
        l[(0, k)] -= u[k];
    }
    Ok(l)
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

struct Operators {
    l: DMatrix<f64>,
    l2: DMatrix<f64>,
    /// `1 + τ‖ℒ‖²_op`.
    scalar_factor: f64,
}

fn operators(inst: &SpectralInstance) -> Result<Operators> {
    inst.validate()?;
    let l = centering_operator(&inst.weights)?;
    let l2 = &l * &l;
    let norm = operator_norm(&l);
    Ok(Operators {
        scalar_factor: 1.0 + inst.tau * norm * norm,
        l,
        l2,
    })
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

/// `Id + τℒ² + γA^{-2s}`.
fn system_matrix(inst: &SpectralInstance, ops: &Operators) -> DMatrix<f64> {
    let mut m = &ops.l2 * inst.tau;
    let d2 = inst.a_power(2.0 * inst.s);
    for k in 0..inst.dim {
        m[(k, k)] += 1.0 + inst.gamma * d2[k];
    }
    m
}

fn solve_checked(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let x = m
        .clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular("Id + τℒ² + γA^{-2s} is not invertible".into()))?;
    let residual = (m * &x - rhs).norm();
    if residual > SOLVE_RTOL * rhs.norm().max(f64::MIN_POSITIVE) && residual > 0.0 {
        return Err(Error::Singular(format!(
            "solve residual {residual:e} too large"
        )));
    }
    Ok(x)
}

fn minimizer_for(
    inst: &SpectralInstance,
    ops: &Operators,
    a: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DVector<f64>> {
    let rhs = a + &ops.l2 * p * inst.tau;
    solve_checked(&system_matrix(inst, ops), &rhs)
}

/// `b̂ = (Id + τℒ² + γA^{-2s})⁻¹(a + τℒ²p)`.
pub fn closed_form_minimizer(inst: &SpectralInstance) -> Result<DVector<f64>> {
    let ops = operators(inst)?;
    minimizer_for(inst, &ops, &inst.a(), &inst.p())
}

/// `‖b - a‖² + τ‖ℒ(b - p)‖² + γ‖A^{-s}b‖²`.
pub fn functional_value(b: &DVector<f64>, inst: &SpectralInstance) -> Result<f64> {
    let ops = operators(inst)?;
    check_len(b, inst.dim)?;
    let gap = &ops.l * (b - inst.p());
    let smooth = b.component_mul(&inst.a_power(inst.s));
    Ok((b - inst.a()).norm_squared()
        + inst.tau * gap.norm_squared()
        + inst.gamma * smooth.norm_squared())
}

/// The three terms of the penalized-problem bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedBoundTerms {
    /// `‖M⁻¹[τℒ²p - (τℒ² + γA^{-2s})a]‖²`, `M = Id + τℒ² + γA^{-2s}`.
    pub first: f64,
    /// `τ‖ℒM⁻¹[a - (Id + γA^{-2s})p]‖²`.
    pub second: f64,
    /// `(r+s)^{(r+s)/s} γ^{r/s} (s-r)^{-(r+s)/s} (1+τ‖ℒ‖²)^{-(r+s)/s} ‖A^{-r}(a + τℒ²p)‖²`.
    pub third: f64,
}

impl PenalizedBoundTerms {
    pub fn total(&self) -> f64 {
        self.first + self.second + self.third
    }
}

fn two_terms(
    inst: &SpectralInstance,
    ops: &Operators,
    a: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<(f64, f64)> {
    let m = system_matrix(inst, ops);
    let d2 = inst.a_power(2.0 * inst.s);
    let first_rhs =
        &ops.l2 * p * inst.tau - &ops.l2 * a * inst.tau - d2.component_mul(a) * inst.gamma;
    let second_rhs = a - p - d2.component_mul(p) * inst.gamma;
    let first = solve_checked(&m, &first_rhs)?.norm_squared();
    let second = inst.tau * (&ops.l * solve_checked(&m, &second_rhs)?).norm_squared();
    Ok((first, second))
}

/// `‖A^{-r}(a + τℒ²p)‖`.
fn source_norm(
    inst: &SpectralInstance,
    ops: &Operators,
    a: &DVector<f64>,
    p: &DVector<f64>,
) -> f64 {
    (a + &ops.l2 * p * inst.tau)
        .component_mul(&inst.a_power(inst.r))
        .norm()
}

pub fn penalized_bound_terms(inst: &SpectralInstance) -> Result<PenalizedBoundTerms> {
    let ops = operators(inst)?;
    let (a, p) = (inst.a(), inst.p());
    let (first, second) = two_terms(inst, &ops, &a, &p)?;
    let src = source_norm(inst, &ops, &a, &p);
    let (r, s) = (inst.r, inst.s);
    let third = if src == 0.0 || inst.gamma == 0.0 {
        0.0
    } else if r == s {
        // (s - r)^{-(r+s)/s} diverges
        f64::INFINITY
    } else {
        let e = (r + s) / s;
        (e * (r + s).ln() + (r / s) * inst.gamma.ln()
            - e * (s - r).ln()
            - e * ops.scalar_factor.ln()
            + 2.0 * src.ln())
        .exp()
    };
    Ok(PenalizedBoundTerms {
        first,
        second,
        third,
    })
}

/// Right-hand side of the penalized-problem bound.
pub fn bound_rhs_eq7(inst: &SpectralInstance) -> Result<f64> {
    Ok(penalized_bound_terms(inst)?.total())
}

/// Right-hand side of the ball-constrained bound: the first two terms at `inst.gamma`.
pub fn ball_bound_rhs(inst: &SpectralInstance) -> Result<f64> {
    let ops = operators(inst)?;
    let (first, second) = two_terms(inst, &ops, &inst.a(), &inst.p())?;
    Ok(first + second)
}

/// `(r+s)^{(r+s)/(s-r)} R^{-2s/(s-r)} (s-r)^{-(r+s)/(s-r)} (1+τ‖ℒ‖²)^{-(r+s)/(s-r)} ‖v‖^{2s/(s-r)}`.
fn printed_threshold(r: f64, s: f64, radius: f64, scalar_factor: f64, src: f64) -> Result<f64> {
    if r >= s {
        return Err(Error::Domain(format!(
            "the gamma threshold needs r < s, got r = {r}, s = {s}"
        )));
    }
    if src == 0.0 {
        return Ok(0.0);
    }
    let d = s - r;
    let e = (r + s) / d;
    Ok(
        (e * (r + s).ln() - (2.0 * s / d) * radius.ln() - e * d.ln() - e * scalar_factor.ln()
            + (2.0 * s / d) * src.ln())
        .exp(),
    )
}

/// The printed `γ` threshold of the ball-constrained bound.
pub fn gamma_threshold_eq8(inst: &SpectralInstance) -> Result<f64> {
    let ops = operators(inst)?;
    let src = source_norm(inst, &ops, &inst.a(), &inst.p());
    printed_threshold(inst.r, inst.s, inst.radius_r, ops.scalar_factor, src)
}

/// An approximation-error bound and the `γ` threshold that goes with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxBound {
    pub rhs: f64,
    /// `None` when `r = s`, where the threshold exponents diverge.
    pub gamma_threshold: Option<f64>,
}

fn check_approx_inputs(
    inst: &SpectralInstance,
    f_rho: &DVector<f64>,
    p: &DVector<f64>,
    sigma_sq: f64,
    d: f64,
) -> Result<()> {
    check_len(f_rho, inst.dim)?;
    check_len(p, inst.dim)?;
    if !(sigma_sq >= 0.0) || !sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq must be finite and nonnegative"));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("d_nu_rho must be positive"));
    }
    Ok(())
}

fn approx_bound(
    inst: &SpectralInstance,
    f_rho: &DVector<f64>,
    p: &DVector<f64>,
    sigma_sq: f64,
    d_nu_rho: f64,
    radius: f64,
) -> Result<ApproxBound> {
    let ops = operators(inst)?;
    check_approx_inputs(inst, f_rho, p, sigma_sq, d_nu_rho)?;
    let (first, second) = two_terms(inst, &ops, f_rho, p)?;
    let d2 = d_nu_rho * d_nu_rho;
    let gamma_threshold = if inst.r < inst.s {
        let src = source_norm(inst, &ops, f_rho, p);
        Some(d2 * printed_threshold(inst.r, inst.s, radius, ops.scalar_factor, src)?)
    } else {
        None
    };
    Ok(ApproxBound {
        rhs: d2 * (first + second) + sigma_sq,
        gamma_threshold,
    })
}

/// Approximation-error bound in the general Hilbert setting. Pass
/// `d_nu_rho = 1` when `ν = ρ`.
pub fn approx_error_bound_eq9(
    inst: &SpectralInstance,
    f_rho: &DVector<f64>,
    p: &DVector<f64>,
    sigma_sq: f64,
    d_nu_rho: f64,
) -> Result<ApproxBound> {
    approx_bound(inst, f_rho, p, sigma_sq, d_nu_rho, inst.radius_r)
}

/// Approximation-error bound over a Sobolev-type ball; the threshold uses
/// the radius `R·C`. `C` must be supplied.
pub fn sobolev_bound_eq10(
    inst: &SpectralInstance,
    f_rho: &DVector<f64>,
    p: &DVector<f64>,
    sigma_sq: f64,
    d_nu_rho: f64,
    c_const: Option<f64>,
) -> Result<ApproxBound> {
    let c = c_const.ok_or_else(|| Error::invalid("the embedding constant C is required"))?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("the embedding constant C must be positive"));
    }
    if inst.r >= inst.s {
        return Err(Error::Domain("the Sobolev bound needs r < s".into()));
    }
    approx_bound(inst, f_rho, p, sigma_sq, d_nu_rho, inst.radius_r * c)
}

/// `‖J_E‖`: largest singular value of `b ↦ W^{1/2} Φ A^{s} b`, the grid
/// evaluation of the unit ball of `E` in `ρ`-weighted coordinates.
pub fn embedding_norm(inst: &SpectralInstance) -> Result<f64> {
    inst.validate()?;
    let basis = SpectralBasis::new(&inst.weights)?;
    let sqrt_w = basis.weights().map(f64::sqrt);
    let scale = inst.a_power(-inst.s);
    let map = DMatrix::from_diagonal(&sqrt_w) * basis.matrix() * DMatrix::from_diagonal(&scale);
    Ok(operator_norm(&map))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub b_hat: DVector<f64>,
    pub functional_at_bhat: f64,
    pub bound_rhs: f64,
    /// `None` when `r = s`.
    pub gamma_threshold: Option<f64>,
    pub bound_holds: bool,
}

impl SpectralReport {
    pub const CSV_HEADER: &'static str = "N,s,r,tau,gamma,functional,bound_rhs,holds";

    pub fn csv_row(&self, inst: &SpectralInstance) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            inst.dim,
            inst.s,
            inst.r,
            inst.tau,
            inst.gamma,
            self.functional_at_bhat,
            self.bound_rhs,
            self.bound_holds
        )
    }
}

/// Closed-form minimum versus the penalized-problem bound.
pub fn spectral_report(inst: &SpectralInstance) -> Result<SpectralReport> {
    let b_hat = closed_form_minimizer(inst)?;
    let functional_at_bhat = functional_value(&b_hat, inst)?;
    if !functional_at_bhat.is_finite() {
        return Err(Error::NonFinite {
            what: "functional",
            point: b_hat.iter().copied().collect(),
            value: functional_at_bhat,
        });
    }
    let bound_rhs = bound_rhs_eq7(inst)?;
    let gamma_threshold = if inst.r < inst.s {
        Some(gamma_threshold_eq8(inst)?)
    } else {
        None
    };
    Ok(SpectralReport {
        bound_holds: functional_at_bhat <= bound_rhs + BOUND_SLACK,
        b_hat,
        functional_at_bhat,
        bound_rhs,
        gamma_threshold,
    })
}
