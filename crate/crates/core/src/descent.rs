//! Gradient descent with backtracking line search.
//!
//! Used as the brute-force reference minimizer for the closed-form solvers
//! and as the solver of record for objectives without a closed form. Trial
//! steps come from the Barzilai-Borwein rule, capped at `max_step`, and are
//! shrunk until the Armijo condition holds. Once the decrease in value drops
//! into floating-point noise, a step is also accepted if it reduces the
//! gradient norm.

use nalgebra::DVector;

const STALL_RTOL: f64 = 1e-8;

/// A differentiable objective.
pub trait SmoothProblem {
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Search gradient at `x` (Euclidean unless the problem uses another metric).
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Directional derivative of `value` at `x` along `-g`, where `g` is the
    /// search gradient. Must be `<= 0`.
    fn descent_slope(&self, _x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        -g.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Stop when the search gradient's Euclidean norm falls to this level.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Give up when a window of this many iterations neither lowers the value
    /// by a relative `1e-8` nor halves the gradient norm.
    pub stall_window: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
            initial_step: 1.0,
            max_step: 1e6,
            min_step: 1e-20,
            armijo: 1e-4,
            stall_window: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize<P: SmoothProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    opts: &DescentOptions,
) -> DescentOutcome {
    let mut x = x0;
    let mut fx = problem.value(&x);
    let mut g = problem.gradient(&x);
    let mut gnorm = g.norm();
    let mut trial = opts.initial_step.min(opts.max_step);
    let mut iterations = 0;
    let (mut best_value, mut best_gnorm, mut last_progress): (f64, f64, usize) = (fx, gnorm, 0);

    while iterations < opts.max_iter {
        if gnorm <= opts.tol {
            break;
        }
        iterations += 1;
        let slope = problem.descent_slope(&x, &g).min(0.0);
        let noise = 64.0 * f64::EPSILON * (1.0 + fx.abs());
        let mut step = trial;
        let accepted = loop {
            let xn = &x - &g * step;
            let fxn = problem.value(&xn);
            if fxn.is_finite() {
                if fxn <= fx + opts.armijo * step * slope {
                    let gn = problem.gradient(&xn);
                    break Some((xn, fxn, gn));
                }
                if fxn <= fx + noise {
                    let gn = problem.gradient(&xn);
                    if gn.norm() < gnorm {
                        break Some((xn, fxn, gn));
                    }
                }
            }
            step *= 0.5;
            if step < opts.min_step {
                break None;
            }
        };
        let Some((xn, fxn, gn)) = accepted else {
            return DescentOutcome {
                x,
                value: fx,
                gradient_norm: gnorm,
                iterations,
                converged: false,
            };
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        trial = if sy > 0.0 {
            (s.norm_squared() / sy).clamp(opts.min_step, opts.max_step)
        } else {
            (2.0 * step).min(opts.max_step)
        };
        x = xn;
        fx = fxn;
        g = gn;
        gnorm = g.norm();
        if iterations - last_progress >= opts.stall_window {
            let gained = best_value - fx > STALL_RTOL * (1.0 + fx.abs());
            if !gained && gnorm > 0.5 * best_gnorm {
                break;
            }
            best_value = fx;
            best_gnorm = gnorm;
            last_progress = iterations;
        }
    }
    DescentOutcome {
        x,
        value: fx,
        gradient_norm: gnorm,
        iterations,
        converged: gnorm <= opts.tol,
    }
}
