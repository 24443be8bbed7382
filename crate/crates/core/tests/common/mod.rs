//! Independent oracles and random task generators shared by integration tests.
#![allow(dead_code)]

use interpreg::function::FunctionSpec;
use interpreg::operator_lab::{SpectralBasis, SpectralInstance};
use interpreg::{InputMeasure, KernelSpec, PriorModel, SyntheticTask};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_function(rng: &mut ChaCha8Rng, dim: usize) -> FunctionSpec {
    let axis = rng.random_range(0..dim);
    let weights: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
    FunctionSpec::Sum {
        terms: vec![
            FunctionSpec::Sinusoid {
                axis,
                amplitude: rng.random_range(0.2..1.0),
                frequency: rng.random_range(0.5..2.0),
                phase: rng.random_range(0.0..6.0),
            },
            FunctionSpec::Linear {
                weights,
                bias: rng.random_range(-0.5..0.5),
            },
            FunctionSpec::Bump {
                center,
                width: rng.random_range(0.1..0.5),
                amplitude: rng.random_range(-1.0..1.0),
            },
        ],
    }
}

/// A random task on `[0,1]^n`, `n ∈ 1..=3`, with a Gaussian kernel.
pub struct RandomTask {
    pub task: SyntheticTask,
    pub kernel: KernelSpec,
    pub m: usize,
    pub lambda: f64,
    pub tau: f64,
}

pub fn random_task(seed: u64, max_m: usize) -> RandomTask {
    let mut rng = rng(seed);
    let dim = rng.random_range(1..=3);
    let f_rho = random_function(&mut rng, dim);
    let prior = random_function(&mut rng, dim);
    let sigma = rng.random_range(0.0..0.3);
    let task = SyntheticTask::new(
        f_rho,
        PriorModel::new(prior),
        sigma,
        InputMeasure::unit_cube(dim),
    )
    .expect("valid task");
    RandomTask {
        task,
        kernel: KernelSpec::Gaussian {
            width: rng.random_range(0.2..1.0),
        },
        m: rng.random_range(5..=max_m),
        lambda: rng.random_range(0.01..0.1),
        tau: rng.random_range(0.0..2.0),
    }
}

pub fn gaussian_gram(xs: &[Vec<f64>], width: f64) -> DMatrix<f64> {
    let n = xs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut d2 = 0.0;
        for (a, b) in xs[i].iter().zip(&xs[j]) {
            d2 += (a - b) * (a - b);
        }
        (-d2 / (2.0 * width * width)).exp()
    })
}

fn mean(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// `(1/m)‖Kc - y‖² + λcᵀKc + τ(1/m)Σ(f_i - p_i - mean)²`, by explicit loops.
pub fn naive_objective(
    k: &DMatrix<f64>,
    c: &DVector<f64>,
    y: &DVector<f64>,
    p: &DVector<f64>,
    lambda: f64,
    tau: f64,
) -> f64 {
    let m = y.len();
    let mut f = vec![0.0; m];
    let mut norm = 0.0;
    for i in 0..m {
        for j in 0..m {
            f[i] += k[(i, j)] * c[j];
            norm += c[i] * k[(i, j)] * c[j];
        }
    }
    let gap_mean = (0..m).map(|i| f[i] - p[i]).sum::<f64>() / m as f64;
    let mut risk = 0.0;
    let mut var = 0.0;
    for i in 0..m {
        risk += (f[i] - y[i]).powi(2);
        var += (f[i] - p[i] - gap_mean).powi(2);
    }
    risk / m as f64 + lambda * norm + tau * var / m as f64
}

/// Gradient descent in the RKHS metric with Barzilai-Borwein steps.
///
/// The search direction is `K⁻¹∇J(c) = (2/m)(f - y) + 2λc + (2τ/m)C(f - p)`,
/// which needs no solve. Stops when its max-abs entry drops below `tol`.
pub fn rkhs_descent_oracle(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &DVector<f64>,
    lambda: f64,
    tau: f64,
    tol: f64,
) -> (DVector<f64>, usize) {
    let m = y.len() as f64;
    let grad = |c: &DVector<f64>| {
        let f = k * c;
        let mut gap = &f - p;
        let mu = mean(&gap);
        gap.add_scalar_mut(-mu);
        (&f - y) * (2.0 / m) + c * (2.0 * lambda) + gap * (2.0 * tau / m)
    };
    let kdot = |u: &DVector<f64>, v: &DVector<f64>| u.dot(&(k * v));
    let mut c = DVector::zeros(y.len());
    let mut g = grad(&c);
    // the metric Hessian is bounded by 2((1 + τ)·tr(K)/m + λ)
    let mut step = 0.5 / ((1.0 + tau) * k.trace() / m + lambda);
    for it in 0..500_000 {
        if g.amax() <= tol {
            return (c, it);
        }
        let next = &c - &g * step;
        let g_next = grad(&next);
        let s = &next - &c;
        let dg = &g_next - &g;
        let curv = kdot(&s, &dg);
        if curv > 0.0 {
            step = (kdot(&s, &s) / curv).clamp(1e-8, 1e8);
        }
        c = next;
        g = g_next;
    }
    (c, 500_000)
}

/// The spectral functional evaluated on the weighted grid: the centering is
/// done by subtracting the weighted mean of grid values, not through `ℒ`.
pub struct GridFunctional {
    basis: SpectralBasis,
    a: DVector<f64>,
    p: DVector<f64>,
    smooth: DVector<f64>,
    tau: f64,
    gamma: f64,
}

impl GridFunctional {
    pub fn new(inst: &SpectralInstance) -> Self {
        let smooth = DVector::from_iterator(
            inst.dim,
            inst.a_eigs.iter().map(|mu| mu.powf(-2.0 * inst.s)),
        );
        Self {
            basis: SpectralBasis::new(&inst.weights).expect("valid weights"),
            a: DVector::from_column_slice(&inst.a_vec),
            p: DVector::from_column_slice(&inst.p_vec),
            smooth,
            tau: inst.tau,
            gamma: inst.gamma,
        }
    }

    fn centered_gap(&self, b: &DVector<f64>) -> DVector<f64> {
        let v = self.basis.values(&(b - &self.p));
        let mu = v.dot(self.basis.weights());
        v.add_scalar(-mu)
    }

    /// `‖b - a‖² + τ‖ℒ(b - p)‖²`, the ball-constrained objective.
    pub fn data_terms(&self, b: &DVector<f64>) -> f64 {
        let diff = self.basis.values(&(b - &self.a));
        self.basis.norm_sq_values(&diff)
            + self.tau * self.basis.norm_sq_values(&self.centered_gap(b))
    }

    pub fn smooth_norm_sq(&self, b: &DVector<f64>) -> f64 {
        b.component_mul(b).dot(&self.smooth)
    }

    pub fn value(&self, b: &DVector<f64>) -> f64 {
        self.data_terms(b) + self.gamma * self.smooth_norm_sq(b)
    }

    pub fn data_gradient(&self, b: &DVector<f64>) -> DVector<f64> {
        let gap = self.centered_gap(b);
        // centering is self-adjoint under the weights, so the adjoint is a projection
        (b - &self.a) * 2.0 + self.basis.project(&gap) * (2.0 * self.tau)
    }

    pub fn gradient(&self, b: &DVector<f64>) -> DVector<f64> {
        self.data_gradient(b) + b.component_mul(&self.smooth) * (2.0 * self.gamma)
    }
}

/// Plain gradient descent with Armijo backtracking on a smooth function,
/// started from `x0`. Steps are seeded with the Barzilai-Borwein length.
pub fn armijo_descent<F, G>(
    f: F,
    grad: G,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut step = 1e-2;
    for _ in 0..max_iter {
        let gn2 = g.norm_squared();
        if g.amax() <= tol {
            break;
        }
        let mut t = step;
        let (xn, fxn) = loop {
            let cand = &x - &g * t;
            let fc = f(&cand);
            if fc <= fx - 1e-4 * t * gn2 || t < 1e-20 {
                break (cand, fc);
            }
            t *= 0.5;
        };
        let gnext = grad(&xn);
        let s = &xn - &x;
        let dg = &gnext - &g;
        let curv = s.dot(&dg);
        step = if curv > 0.0 {
            (s.norm_squared() / curv).clamp(1e-12, 1e6)
        } else {
            t * 2.0
        };
        if (fx - fxn).abs() == 0.0 && t < 1e-20 {
            break;
        }
        x = xn;
        fx = fxn;
        g = gnext;
    }
    x
}

/// Brute-force minimizer of the penalized spectral functional.
pub fn spectral_descent_oracle(inst: &SpectralInstance, start: DVector<f64>) -> DVector<f64> {
    let gf = GridFunctional::new(inst);
    armijo_descent(|b| gf.value(b), |b| gf.gradient(b), start, 1e-12, 200_000)
}

/// `min ‖b - a‖² + τ‖ℒ(b - p)‖²` over `‖A^{-s}b‖ <= R`, by an escalating
/// quadratic penalty on `(‖A^{-s}b‖² - R²)₊`. The final point is scaled into
/// the ball, so the returned value is attained by a feasible point.
pub fn constrained_penalty_oracle(inst: &SpectralInstance) -> (DVector<f64>, f64) {
    let gf = GridFunctional::new(inst);
    let r2 = inst.radius_r * inst.radius_r;
    let mut b = DVector::zeros(inst.dim);
    let mut rho = 1.0;
    while rho <= 1e12 {
        let excess = |b: &DVector<f64>| (gf.smooth_norm_sq(b) - r2).max(0.0);
        b = armijo_descent(
            |b| gf.data_terms(b) + rho * excess(b).powi(2),
            |b| gf.data_gradient(b) + b.component_mul(&gf.smooth) * (4.0 * rho * excess(b)),
            b,
            1e-11,
            50_000,
        );
        if excess(&b) <= 1e-12 * r2 {
            break;
        }
        rho *= 10.0;
    }
    let norm2 = gf.smooth_norm_sq(&b);
    if norm2 > r2 {
        b *= (r2 / norm2).sqrt();
    }
    let value = gf.data_terms(&b);
    (b, value)
}
