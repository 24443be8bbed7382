//! Randomized checks of library results against independent oracles.

mod common;

use interpreg::bounds::{
    invert_bound_for_epsilon, monte_carlo_validate_bound, sample_error_confidence, BoundInputs,
    MonteCarloConfig,
};
use interpreg::function::FunctionSpec;
use interpreg::kernel::{gram_matrix, rkhs_norm_sq};
use interpreg::metric::{empirical_metric, population_metric};
use interpreg::operator_lab::{
    approx_error_bound_eq9, centering_operator, closed_form_minimizer, functional_value,
    random_instance, sobolev_bound_eq10, FuzzRegime, SpectralBasis,
};
use interpreg::solver::{
    class_minimizer, error_decomposition, fit_in_ball, fit_tikhonov, objective_value,
};
use interpreg::task::{quadrature_nodes, sample_dataset};
use interpreg::{
    Execution, FitConfig, Hypothesis, InputMeasure, JitterPolicy, KernelSpec, PriorModel,
    SyntheticTask,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use common::{
    armijo_descent, constrained_penalty_oracle, gaussian_gram, random_task, rkhs_descent_oracle,
    spectral_descent_oracle, GridFunctional,
};

fn random_points(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = common::rng(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect()
}

#[test]
fn zero_noise_gaussian_sample_mean_is_within_clt_band() {
    let task = SyntheticTask::new(
        FunctionSpec::Zero,
        PriorModel::new(FunctionSpec::Zero),
        1.0,
        InputMeasure::unit_interval(),
    )
    .unwrap();
    let ds = sample_dataset(&task, 10_000, 3).unwrap();
    let mean = ds.ys.iter().sum::<f64>() / ds.m as f64;
    assert!(mean.abs() <= 4.0 / 100.0, "{mean}");
}

#[test]
fn midpoint_rule_integrates_identity() {
    let nodes = quadrature_nodes(&InputMeasure::unit_interval(), 100).unwrap();
    let integral: f64 = nodes.iter().map(|n| n.weight * n.point[0]).sum();
    assert!((integral - 0.5).abs() < 1e-3);
}

#[test]
fn gaussian_gram_is_psd_before_jitter() {
    let pts = random_points(1, 50, 2);
    let k = KernelSpec::Gaussian { width: 1.0 }.matrix(&pts);
    let eig = SymmetricEigen::new(k).eigenvalues;
    assert!(eig.min() >= -1e-10, "{}", eig.min());
}

#[test]
fn rkhs_norm_matches_double_sum() {
    let mut rng = common::rng(2);
    for trial in 0..20 {
        let pts = random_points(100 + trial, 15, 2);
        let kernel = KernelSpec::Gaussian { width: 0.4 };
        let c = DVector::from_fn(15, |_, _| rng.random_range(-2.0..2.0));
        let h = Hypothesis::new(c.clone(), pts.clone(), kernel).unwrap();
        let gram = gram_matrix(&kernel, &pts, JitterPolicy::default()).unwrap();
        let mut naive = 0.0;
        for i in 0..15 {
            for j in 0..15 {
                naive += c[i] * c[j] * kernel.eval(&pts[i], &pts[j]);
            }
        }
        assert!((rkhs_norm_sq(&h, &gram).unwrap() - naive).abs() <= 1e-10);
    }
}

#[test]
fn evaluation_matches_direct_sum() {
    let pts = random_points(5, 12, 3);
    let c = DVector::from_fn(12, |i, _| (i as f64 * 0.7).sin());
    let width = 0.6;
    let h = Hypothesis::new(c.clone(), pts.clone(), KernelSpec::Gaussian { width }).unwrap();
    for x in random_points(6, 30, 3) {
        let mut direct = 0.0;
        for (ci, p) in c.iter().zip(&pts) {
            let d2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            direct += ci * (-d2 / (2.0 * width * width)).exp();
        }
        assert!((h.evaluate(&x).unwrap() - direct).abs() <= 1e-12);
    }
}

#[test]
fn tikhonov_matches_descent_oracle() {
    for seed in 0..10 {
        let t = random_task(7000 + seed, 40);
        let ds = sample_dataset(&t.task, t.m, seed).unwrap();
        let fit = fit_tikhonov(&ds, &t.kernel, 0.1).unwrap();
        let KernelSpec::Gaussian { width } = t.kernel else {
            unreachable!()
        };
        let k = gaussian_gram(&ds.xs, width);
        let y = DVector::from_column_slice(&ds.ys);
        let zeros = DVector::zeros(ds.m);
        let (c, _) = rkhs_descent_oracle(&k, &y, &zeros, 0.1, 0.0, 1e-12);
        let oracle = common::naive_objective(&k, &c, &y, &zeros, 0.1, 0.0);
        assert!((fit.objective_value - oracle).abs() <= 1e-8 * oracle);
    }
}

#[test]
fn objective_is_the_sum_of_its_parts() {
    let mut rng = common::rng(9);
    for seed in 0..10 {
        let t = random_task(8000 + seed, 30);
        let ds = sample_dataset(&t.task, t.m, seed).unwrap();
        let c = DVector::from_fn(ds.m, |_, _| rng.random_range(-1.0..1.0));
        let h = Hypothesis::new(c, ds.xs.clone(), t.kernel).unwrap();
        let cfg = FitConfig::new(t.lambda, t.tau);
        let f = h.evaluate_many(&ds.xs).unwrap();
        let p: Vec<f64> = ds.xs.iter().map(|x| t.task.prior.eval(x)).collect();
        let risk = f
            .iter()
            .zip(&ds.ys)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / ds.m as f64;
        let gram = gram_matrix(&t.kernel, &ds.xs, JitterPolicy::default()).unwrap();
        let expected = risk
            + t.lambda * rkhs_norm_sq(&h, &gram).unwrap()
            + t.tau * empirical_metric(&f, &p).unwrap().variance;
        let got = objective_value(&h, &ds, &t.task.prior, &cfg).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn sample_error_median_shrinks_with_m() {
    let task = SyntheticTask::new(
        FunctionSpec::Sinusoid {
            axis: 0,
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.3,
        },
        PriorModel::new(FunctionSpec::Linear {
            weights: vec![-1.5],
            bias: 0.2,
        }),
        0.2,
        InputMeasure::unit_interval(),
    )
    .unwrap();
    let kernel = KernelSpec::Gaussian { width: 0.3 };
    let cfg = FitConfig::new(1e-3, 1.0);
    let nodes = quadrature_nodes(&task.input_dist, 200).unwrap();
    let fh = class_minimizer(&task, &kernel, &cfg, &nodes)
        .unwrap()
        .hypothesis;
    let radius = {
        let k = kernel.matrix(&fh.centers);
        fh.coeffs.dot(&(k * &fh.coeffs)).sqrt()
    };
    let medians: Vec<f64> = [20, 80, 320]
        .iter()
        .map(|&m| {
            let errors = Execution::default().map_indexed(50, |seed| {
                let ds = sample_dataset(&task, m, seed as u64).unwrap();
                let fit = fit_in_ball(&ds, &task.prior, &kernel, &cfg, radius).unwrap();
                error_decomposition(&fit.fit.hypothesis, &task, &fh, &nodes, cfg.tau)
                    .unwrap()
                    .sample
            });
            median(errors)
        })
        .collect();
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "{medians:?}"
    );
}

#[test]
fn centering_matches_weighted_mean_removal() {
    let mut rng = common::rng(12);
    let raw: Vec<f64> = (0..8).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    let basis = SpectralBasis::new(&w).unwrap();
    let l = centering_operator(&w).unwrap();
    for _ in 0..20 {
        let v = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let vals = basis.values(&v);
        let mean: f64 = vals.iter().zip(&w).map(|(a, b)| a * b).sum();
        let centered = basis.project(&vals.add_scalar(-mean));
        assert!((&l * &v - centered).amax() <= 1e-12);
    }
}

#[test]
fn functional_matches_grid_evaluation() {
    let mut rng = common::rng(13);
    for seed in 0..20 {
        let inst = random_instance(&FuzzRegime::default(), seed);
        let b = DVector::from_fn(inst.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let got = functional_value(&b, &inst).unwrap();
        let want = GridFunctional::new(&inst).value(&b);
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} {want}");
    }
}

#[test]
fn closed_form_matches_descent_at_dim_twelve() {
    let regime = FuzzRegime {
        dim: [12, 12],
        ..FuzzRegime::default()
    };
    for seed in 0..10 {
        let inst = random_instance(&regime, seed);
        let b = closed_form_minimizer(&inst).unwrap();
        let oracle = spectral_descent_oracle(&inst, DVector::zeros(12));
        assert!((b - oracle).amax() <= 1e-7);
    }
}

#[test]
fn descent_from_random_starts_reaches_the_closed_form() {
    let mut rng = common::rng(14);
    let inst = random_instance(&FuzzRegime::default(), 99);
    let b = closed_form_minimizer(&inst).unwrap();
    for _ in 0..10 {
        let start = DVector::from_fn(inst.dim, |_, _| 5.0 * rng.sample::<f64, _>(StandardNormal));
        let found = spectral_descent_oracle(&inst, start);
        assert!((&b - found).amax() <= 1e-6);
    }
}

#[test]
fn approximation_bounds_hold_below_threshold() {
    let regime = FuzzRegime::default();
    let mut checked = 0;
    let mut seed = 0;
    while checked < 15 {
        let inst = random_instance(&regime, 300 + seed);
        seed += 1;
        let f_rho = DVector::from_column_slice(&inst.a_vec);
        let p = DVector::from_column_slice(&inst.p_vec);
        let sigma_sq = 0.01;
        for c_const in [None, Some(1.5)] {
            let scale = c_const.unwrap_or(1.0);
            let bound = match c_const {
                None => approx_error_bound_eq9(&inst, &f_rho, &p, sigma_sq, 1.0).unwrap(),
                Some(c) => sobolev_bound_eq10(&inst, &f_rho, &p, sigma_sq, 1.0, Some(c)).unwrap(),
            };
            let Some(threshold) = bound.gamma_threshold.filter(|t| t.is_finite() && *t > 0.0)
            else {
                continue;
            };
            let at_half = inst.with_gamma(0.5 * threshold);
            let bound = match c_const {
                None => approx_error_bound_eq9(&at_half, &f_rho, &p, sigma_sq, 1.0).unwrap(),
                Some(c) => {
                    sobolev_bound_eq10(&at_half, &f_rho, &p, sigma_sq, 1.0, Some(c)).unwrap()
                }
            };
            let mut ball = at_half.clone();
            ball.radius_r *= scale;
            let (_, min) = constrained_penalty_oracle(&ball);
            assert!(
                min + sigma_sq <= bound.rhs + 1e-9,
                "seed {seed}: {} > {}",
                min + sigma_sq,
                bound.rhs
            );
            checked += 1;
        }
    }
}

#[test]
fn inversion_matches_grid_scan() {
    let mut rng = common::rng(15);
    for _ in 0..5 {
        let m = rng.random_range(1_000..100_000);
        let delta = rng.random_range(0.01..0.5);
        let big_m = rng.random_range(0.1..2.0);
        let m_p = rng.random_range(0.0..1.0);
        let d = rng.random_range(1..5);
        let radius = rng.random_range(0.5..2.0);
        let eps = invert_bound_for_epsilon(m, delta, big_m, m_p, d, radius).unwrap();
        let conf = |epsilon: f64| {
            sample_error_confidence(&BoundInputs {
                m,
                epsilon,
                big_m,
                m_p,
                covering_dim: d,
                radius_r: radius,
                delta,
            })
            .unwrap()
            .raw
        };
        let (lo, hi) = (1e-6f64, 1e6f64);
        let n = 100_000;
        let grid = |k: usize| lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
        let first = (0..n)
            .find(|&k| conf(grid(k)) >= 1.0 - delta)
            .expect("reachable in grid");
        assert!(first > 0);
        assert!(
            eps > grid(first - 1) && eps <= grid(first),
            "{eps} not in ({}, {}]",
            grid(first - 1),
            grid(first)
        );
    }
}

#[test]
fn easy_task_has_no_violations() {
    let prior = FunctionSpec::Bump {
        center: vec![0.5],
        width: 0.4,
        amplitude: 0.5,
    };
    let task = SyntheticTask::new(
        prior.clone(),
        PriorModel::new(prior),
        0.0,
        InputMeasure::unit_interval(),
    )
    .unwrap();
    let mc = MonteCarloConfig {
        m: 30,
        epsilon: 10.0,
        trials: 100,
        seed: 4,
        resolution: 100,
    };
    let rep = monte_carlo_validate_bound(
        &task,
        &KernelSpec::Gaussian { width: 0.4 },
        &FitConfig::new(1e-4, 1.0),
        &mc,
        Execution::default(),
    )
    .unwrap();
    assert_eq!(rep.violation_freq, 0.0);
    assert!(rep.consistent);
}

#[test]
fn metric_of_identity_matches_monte_carlo() {
    let nodes = quadrature_nodes(&InputMeasure::unit_interval(), 200).unwrap();
    let f = FunctionSpec::Linear {
        weights: vec![1.0],
        bias: 0.0,
    };
    let quad = population_metric(&f, &PriorModel::new(FunctionSpec::Zero), &nodes).unwrap();
    let mut rng = common::rng(16);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    assert!((quad.variance - var).abs() < 1e-3);
    assert!((quad.variance - 1.0 / 12.0).abs() < 1e-3);
}

#[test]
fn armijo_oracle_minimizes_a_quadratic() {
    let h = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
    let b = DVector::from_column_slice(&[1.0, -1.0]);
    let x = armijo_descent(
        |x| 0.5 * x.dot(&(&h * x)) - b.dot(x),
        |x| &h * x - &b,
        DVector::zeros(2),
        1e-13,
        10_000,
    );
    let exact = h.lu().solve(&b).unwrap();
    assert!((x - exact).amax() < 1e-12);
}
