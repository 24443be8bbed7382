//! Sample-error confidence bound, its Monte Carlo validation, and the
//! equilibrium constants.
//!
//! The bound reads
//!
//! ```text
//! P{ |ℰ^P(f_z) - ℰ^P(f_H)| + |ℰ(f_z) - ℰ(f_H)| <= ε }
//!     >= 1 - N(H, ε/(8(3M + 2M_p))) · exp(-(mε/(32(M² + M_p²))) · (M/(3M + 2M_p))²)
//! ```
//!
//! with the covering number of `H` estimated by the volumetric bound for a
//! ball of radius `R` in the effective Gram dimension `d`.

use crate::error::{Error, Result};
use crate::kernel::{effective_dimension, quadratic_form, Hypothesis, KernelSpec};
use crate::par::{derive_seed, Execution};
use crate::solver::{class_minimizer, error_decomposition, fit_in_ball, FitConfig};
use crate::task::{quadrature_nodes, sample_dataset, Dataset, SyntheticTask};

/// Search range for [`invert_bound_for_epsilon`].
pub const EPSILON_RANGE: (f64, f64) = (1e-12, 1e12);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub m: usize,
    pub epsilon: f64,
    /// A.e. bound on `|f - y|`.
    pub big_m: f64,
    /// A.e. bound on `|f - P - μ^P(f)|`.
    pub m_p: f64,
    pub covering_dim: usize,
    pub radius_r: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(Error::invalid("M must be positive"));
        }
        if !(self.m_p >= 0.0) || !self.m_p.is_finite() {
            return Err(Error::invalid("M_p must be nonnegative"));
        }
        if self.covering_dim == 0 {
            return Err(Error::invalid("covering dimension must be positive"));
        }
        if !(self.radius_r > 0.0) || !self.radius_r.is_finite() {
            return Err(Error::invalid("R must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "m,epsilon,M,Mp,d,R,raw,clamped,vacuous";

    pub fn csv_row(&self, c: &Confidence) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.m,
            self.epsilon,
            self.big_m,
            self.m_p,
            self.covering_dim,
            self.radius_r,
            c.raw,
            c.clamped,
            c.vacuous
        )
    }
}

fn ln_covering(d: usize, radius: f64, eta: f64) -> f64 {
    d as f64 * (2.0 * radius / eta).ln_1p()
}

/// `(2R/η + 1)^d`.
pub fn covering_number_ball(d: usize, radius: f64, eta: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("covering dimension must be positive"));
    }
    if !(radius > 0.0) || !(eta > 0.0) || !radius.is_finite() || !eta.is_finite() {
        return Err(Error::invalid("radius and eta must be positive and finite"));
    }
    let base = 2.0 * radius / eta + 1.0;
    Ok(match i32::try_from(d) {
        Ok(k) => base.powi(k),
        Err(_) => f64::INFINITY,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub raw: f64,
    /// `max(raw, 0)`.
    pub clamped: f64,
    /// `raw <= 0`: the bound asserts nothing.
    pub vacuous: bool,
}

fn raw_confidence(m: usize, epsilon: f64, big_m: f64, m_p: f64, d: usize, radius: f64) -> f64 {
    let spread = 3.0 * big_m + 2.0 * m_p;
    let eta = epsilon / (8.0 * spread);
    let ratio = big_m / spread;
    let exponent = (m as f64 * epsilon / (32.0 * (big_m * big_m + m_p * m_p))) * ratio * ratio;
    // evaluated as one exponential so huge covering numbers do not overflow first
    -(ln_covering(d, radius, eta) - exponent).exp_m1()
}

pub fn sample_error_confidence(inputs: &BoundInputs) -> Result<Confidence> {
    inputs.validate()?;
    let raw = raw_confidence(
        inputs.m,
        inputs.epsilon,
        inputs.big_m,
        inputs.m_p,
        inputs.covering_dim,
        inputs.radius_r,
    );
    Ok(Confidence {
        raw,
        clamped: raw.max(0.0),
        vacuous: raw <= 0.0,
    })
}

/// Smallest `ε` whose raw confidence reaches `1 - δ`, by bisection on
/// `log ε` over [`EPSILON_RANGE`]. Returns `+∞` when the target is not
/// reached inside the range.
pub fn invert_bound_for_epsilon(
    m: usize,
    delta: f64,
    big_m: f64,
    m_p: f64,
    d: usize,
    radius: f64,
) -> Result<f64> {
    let probe = BoundInputs {
        m,
        epsilon: 1.0,
        big_m,
        m_p,
        covering_dim: d,
        radius_r: radius,
        delta,
    };
    probe.validate()?;
    let target = 1.0 - delta;
    let conf = |eps: f64| raw_confidence(m, eps, big_m, m_p, d, radius);
    let (mut lo, mut hi) = EPSILON_RANGE;
    if conf(hi) < target {
        return Ok(f64::INFINITY);
    }
    if conf(lo) >= target {
        return Ok(lo);
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let c = conf(mid);
        if c >= target {
            hi = mid;
            if c <= target + 1e-9 {
                break;
            }
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 <= 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResult {
    /// `NaN` when infeasible.
    pub m_star: f64,
    /// `NaN` when infeasible.
    pub r_star: f64,
    pub discriminant: f64,
    pub feasible: bool,
    /// Set when `m_star <= 0`, which cannot be an a.e. bound on `|f - y|`.
    pub warning: bool,
}

/// `M* = [-(M_p + F) + √((M_p + F)² - 24M_p²)]/4` and
/// `R* = (M* - M_p - F)/‖J_E‖`, with `F = ‖f_ρ‖_∞`.
pub fn equilibrium_constants(m_p: f64, f_sup: f64, j_norm: f64) -> Result<EquilibriumResult> {
    if !m_p.is_finite() || !f_sup.is_finite() || !(m_p >= 0.0) || !(f_sup >= 0.0) {
        return Err(Error::invalid(
            "M_p and sup |f_rho| must be finite and nonnegative",
        ));
    }
    if !(j_norm > 0.0) || !j_norm.is_finite() {
        return Err(Error::invalid("the embedding norm must be positive"));
    }
    let b = m_p + f_sup;
    let discriminant = b * b - 24.0 * m_p * m_p;
    if discriminant < 0.0 {
        return Ok(EquilibriumResult {
            m_star: f64::NAN,
            r_star: f64::NAN,
            discriminant,
            feasible: false,
            warning: false,
        });
    }
    let m_star = (-b + discriminant.sqrt()) / 4.0;
    Ok(EquilibriumResult {
        m_star,
        r_star: (m_star - m_p - f_sup) / j_norm,
        discriminant,
        feasible: true,
        warning: m_star <= 0.0,
    })
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub m: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Per-axis resolution of the quadrature behind `f_H` and the risks.
    pub resolution: usize,
}

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub trials: usize,
    /// Trials whose fit or evaluation failed; excluded from the frequency.
    pub failures: usize,
    pub violation_freq: f64,
    /// Bound inputs with `M`, `M_p` and `d` measured across trials and `R = ‖f_H‖_K`.
    pub inputs: BoundInputs,
    pub bound: Confidence,
    pub consistent: bool,
}

impl MonteCarloReport {
    pub const CSV_HEADER: &'static str = "trials,violation_freq,consistent";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.trials, self.violation_freq, self.consistent
        )
    }
}

/// Frequency within the bound-implied failure probability plus two binomial
/// standard errors, or a vacuous bound.
pub fn is_consistent(violation_freq: f64, trials: usize, bound: &Confidence) -> bool {
    if bound.vacuous {
        return true;
    }
    let slack = 2.0 * (violation_freq * (1.0 - violation_freq) / trials as f64).sqrt();
    violation_freq <= (1.0 - bound.clamped) + slack
}

struct Trial {
    deviation: f64,
    big_m: f64,
    m_p: f64,
    dim: usize,
}

/// Largest `|f(x_i) - y_i|` and `|f(x_i) - P(x_i) - mean|` over the sample.
fn sup_residuals(h: &Hypothesis, ds: &Dataset, task: &SyntheticTask) -> Result<(f64, f64)> {
    let f = h.evaluate_many(&ds.xs)?;
    let gaps: Vec<f64> = f
        .iter()
        .zip(&ds.xs)
        .map(|(v, x)| v - task.prior.eval(x))
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let big_m = f
        .iter()
        .zip(&ds.ys)
        .fold(0.0f64, |a, (v, y)| a.max((v - y).abs()));
    let m_p = gaps.iter().fold(0.0f64, |a, g| a.max((g - mean).abs()));
    Ok((big_m, m_p))
}

/// Draws `trials` datasets, fits each inside the ball `‖f‖_K <= ‖f_H‖_K`,
/// and counts deviations above `ε`.
pub fn monte_carlo_validate_bound(
    task: &SyntheticTask,
    kernel: &KernelSpec,
    config: &FitConfig,
    mc: &MonteCarloConfig,
    exec: Execution,
) -> Result<MonteCarloReport> {
    if mc.trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials")));
    }
    if !(mc.epsilon > 0.0) || mc.m == 0 {
        return Err(Error::invalid("epsilon and m must be positive"));
    }
    task.validate()?;
    let nodes = quadrature_nodes(&task.input_dist, mc.resolution)?;
    let f_h = class_minimizer(task, kernel, config, &nodes)?.hypothesis;
    let radius = quadratic_form(&kernel.matrix(&f_h.centers), &f_h.coeffs)?.sqrt();
    if !(radius > 0.0) {
        return Err(Error::Domain(
            "the class minimizer is zero; the ball is degenerate".into(),
        ));
    }
    let base = error_decomposition(&f_h, task, &f_h, &nodes, config.tau)?;

    let outcomes = exec.map_indexed(mc.trials, |i| -> Result<Trial> {
        let ds = sample_dataset(task, mc.m, derive_seed(mc.seed, i as u64))?;
        let fit = fit_in_ball(&ds, &task.prior, kernel, config, radius)?;
        let fz = &fit.fit.hypothesis;
        let rep = error_decomposition(fz, task, &f_h, &nodes, config.tau)?;
        let deviation = (rep.interp_variance - base.interp_variance).abs()
            + (rep.generalization - base.generalization).abs();
        let (mz, pz) = sup_residuals(fz, &ds, task)?;
        let (mh, ph) = sup_residuals(&f_h, &ds, task)?;
        Ok(Trial {
            deviation,
            big_m: mz.max(mh),
            m_p: pz.max(ph),
            dim: effective_dimension(&kernel.matrix(&ds.xs)),
        })
    });

    let mut ok = 0usize;
    let mut violations = 0usize;
    let (mut big_m, mut m_p, mut dim) = (0.0f64, 0.0f64, 1usize);
    for t in outcomes.iter().flatten() {
        ok += 1;
        if t.deviation > mc.epsilon {
            violations += 1;
        }
        big_m = big_m.max(t.big_m);
        m_p = m_p.max(t.m_p);
        dim = dim.max(t.dim);
    }
    if ok == 0 {
        return Err(Error::Domain("every Monte Carlo trial failed".into()));
    }
    let inputs = BoundInputs {
        m: mc.m,
        epsilon: mc.epsilon,
        big_m: big_m.max(f64::MIN_POSITIVE),
        m_p,
        covering_dim: dim,
        radius_r: radius,
        delta: 0.5,
    };
    let bound = sample_error_confidence(&inputs)?;
    let violation_freq = violations as f64 / ok as f64;
    Ok(MonteCarloReport {
        trials: ok,
        failures: mc.trials - ok,
        violation_freq,
        consistent: is_consistent(violation_freq, ok, &bound),
        inputs,
        bound,
    })
}

/// `(M, M_p)` for a fixed hypothesis and dataset, as used by the validator.
pub fn measured_bounds(h: &Hypothesis, ds: &Dataset, task: &SyntheticTask) -> Result<(f64, f64)> {
    sup_residuals(h, ds, task)
}

/// `max_x |f(x)|` over a set of points.
pub fn sup_norm_on<F: crate::function::RealFunction + ?Sized>(f: &F, points: &[Vec<f64>]) -> f64 {
    points.iter().fold(0.0f64, |a, x| a.max(f.value(x).abs()))
}

/// Effective dimension of the Gram matrix on `points`.
pub fn covering_dimension(kernel: &KernelSpec, points: &[Vec<f64>]) -> usize {
    effective_dimension(&kernel.matrix(points)).max(1)
}
