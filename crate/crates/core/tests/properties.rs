//! Property tests for invariants that must hold on every input.

use interpreg::bounds::{invert_bound_for_epsilon, sample_error_confidence, BoundInputs};
use interpreg::function::FunctionSpec;
use interpreg::kernel::{gram_matrix, rkhs_norm_sq};
use interpreg::metric::{empirical_metric, population_metric};
use interpreg::operator_lab::{
    centering_operator, closed_form_minimizer, functional_value, random_instance, FuzzRegime,
};
use interpreg::solver::fit_interpretable;
use interpreg::task::{quadrature_nodes, sample_dataset, Node};
use interpreg::{
    FitConfig, Hypothesis, InputMeasure, JitterPolicy, KernelSpec, PriorModel, SyntheticTask,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.05f64..2.0).prop_map(|width| KernelSpec::Gaussian { width }),
        (1u32..4, 0.0f64..2.0)
            .prop_map(|(degree, offset)| KernelSpec::Polynomial { degree, offset }),
        Just(KernelSpec::Linear),
    ]
}

fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4)
        .prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(0.0f64..1.0, dim), 1..25))
}

fn bound_inputs() -> impl Strategy<Value = BoundInputs> {
    (
        1usize..100_000,
        1e-3f64..10.0,
        0.1f64..5.0,
        0.0f64..3.0,
        1usize..20,
        0.1f64..10.0,
    )
        .prop_map(
            |(m, epsilon, big_m, m_p, covering_dim, radius_r)| BoundInputs {
                m,
                epsilon,
                big_m,
                m_p,
                covering_dim,
                radius_r,
                delta: 0.1,
            },
        )
}

fn raw(inputs: &BoundInputs) -> f64 {
    sample_error_confidence(inputs).unwrap().raw
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_ignores_shifts(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
        shift in -10.0f64..10.0,
    ) {
        let (f, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let shifted: Vec<f64> = f.iter().map(|v| v + shift).collect();
        let base = empirical_metric(&f, &p).unwrap().variance;
        prop_assert!((empirical_metric(&shifted, &p).unwrap().variance - base).abs() <= 1e-10);
        prop_assert!((empirical_metric(&p, &f).unwrap().variance - base).abs() <= 1e-10);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn equal_weight_population_equals_empirical(
        rows in prop::collection::vec((0.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0), 1..30),
    ) {
        // a discrete measure on the sample points with equal weights
        let n = rows.len();
        let points: Vec<Vec<f64>> = rows.iter().enumerate().map(|(i, _)| vec![i as f64]).collect();
        let f = FunctionSpec::Tabulated { points: points.clone(), values: rows.iter().map(|r| r.1).collect() };
        let p = FunctionSpec::Tabulated { points: points.clone(), values: rows.iter().map(|r| r.2).collect() };
        let nodes: Vec<Node> = points.iter().map(|x| Node { point: x.clone(), weight: 1.0 / n as f64 }).collect();
        let pop = population_metric(&f, &PriorModel::new(p), &nodes).unwrap();
        let fv: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let pv: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let emp = empirical_metric(&fv, &pv).unwrap();
        prop_assert!((pop.variance - emp.variance).abs() <= 1e-12);
        prop_assert!((pop.mean_error - emp.mean_error).abs() <= 1e-12);
    }

    #[test]
    fn gram_is_symmetric_psd_and_norms_nonnegative(
        kernel in kernel_strategy(),
        points in points_strategy(),
        seed in any::<u64>(),
    ) {
        let k = kernel.matrix(&points);
        prop_assert!((&k - k.transpose()).amax() <= 1e-12);
        let scale = k.amax().max(1.0);
        prop_assert!(SymmetricEigen::new(k).eigenvalues.min() >= -1e-10 * scale);
        let gram = gram_matrix(&kernel, &points, JitterPolicy::default());
        if let Ok(gram) = gram {
            let c = DVector::from_fn(points.len(), |i, _| ((seed.wrapping_add(i as u64) % 1000) as f64 / 500.0) - 1.0);
            let h = Hypothesis::new(c, points.clone(), kernel).unwrap();
            prop_assert!(rkhs_norm_sq(&h, &gram).unwrap() >= 0.0);
        }
    }

    #[test]
    fn quadrature_weights_form_a_probability_vector(dim in 1usize..4, resolution in 1usize..30) {
        let nodes = quadrature_nodes(&InputMeasure::unit_cube(dim), resolution).unwrap();
        prop_assert!(nodes.iter().all(|n| n.weight >= 0.0));
        prop_assert!((nodes.iter().map(|n| n.weight).sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn datasets_are_reproducible(m in 1usize..50, seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let task = SyntheticTask::new(
            FunctionSpec::Sinusoid { axis: 0, amplitude: 1.0, frequency: 1.0, phase: 0.0 },
            PriorModel::new(FunctionSpec::Zero),
            sigma,
            InputMeasure::unit_interval(),
        ).unwrap();
        let a = sample_dataset(&task, m, seed).unwrap();
        let b = sample_dataset(&task, m, seed).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        prop_assert_eq!(ca, cb);
    }

    #[test]
    fn interpretability_variance_falls_as_tau_grows(
        seed in any::<u64>(),
        m in 5usize..40,
        lambda in 1e-3f64..0.1,
        t1 in 0.0f64..5.0,
        dt in 0.0f64..5.0,
    ) {
        let task = SyntheticTask::new(
            FunctionSpec::Sinusoid { axis: 0, amplitude: 1.0, frequency: 1.5, phase: 0.2 },
            PriorModel::new(FunctionSpec::Polynomial { axis: 0, coeffs: vec![0.0, 1.0, -2.0] }),
            0.1,
            InputMeasure::unit_interval(),
        ).unwrap();
        let kernel = KernelSpec::Gaussian { width: 0.3 };
        let ds = sample_dataset(&task, m, seed).unwrap();
        let var = |tau: f64| {
            let cfg = FitConfig::new(lambda, tau);
            let fit = fit_interpretable(&ds, &task.prior, &kernel, &cfg).unwrap();
            fit.summarize(&ds, &task.prior, &cfg).unwrap().interp_variance
        };
        prop_assert!(var(t1 + dt) <= var(t1) + 1e-10);
    }

    #[test]
    fn confidence_is_monotone(inputs in bound_inputs(), dm in 1usize..10_000, scale in 1.0f64..10.0, dd in 1usize..5) {
        let base = raw(&inputs);
        let more_m = raw(&BoundInputs { m: inputs.m + dm, ..inputs });
        let more_eps = raw(&BoundInputs { epsilon: inputs.epsilon * scale, ..inputs });
        let more_dim = raw(&BoundInputs { covering_dim: inputs.covering_dim + dd, ..inputs });
        let more_radius = raw(&BoundInputs { radius_r: inputs.radius_r * scale, ..inputs });
        prop_assert!(more_m >= base);
        prop_assert!(more_eps >= base);
        prop_assert!(more_dim <= base);
        prop_assert!(more_radius <= base);
    }

    #[test]
    fn inversion_round_trips(inputs in bound_inputs(), delta in 0.01f64..0.9) {
        let eps = invert_bound_for_epsilon(inputs.m, delta, inputs.big_m, inputs.m_p, inputs.covering_dim, inputs.radius_r).unwrap();
        if eps.is_finite() && eps > 1e-12 {
            let c = raw(&BoundInputs { epsilon: eps, delta, ..inputs });
            prop_assert!(c >= 1.0 - delta && c <= 1.0 - delta + 1e-6, "{}", c);
        }
    }

    #[test]
    fn doubling_m_shrinks_the_inverted_epsilon(inputs in bound_inputs()) {
        let inv = |m: usize| invert_bound_for_epsilon(m, 0.1, inputs.big_m, inputs.m_p, inputs.covering_dim, inputs.radius_r).unwrap();
        let (a, b) = (inv(inputs.m), inv(2 * inputs.m));
        if a.is_finite() && a > 1e-12 {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn centering_is_idempotent_and_kills_constants(seed in 0u64..10_000) {
        let inst = random_instance(&FuzzRegime::default(), seed);
        let l = centering_operator(&inst.weights).unwrap();
        prop_assert!((&l * &l - &l).amax() <= 1e-12);
        let mut constant = DVector::zeros(inst.dim);
        constant[0] = 1.0;
        prop_assert!((&l * constant).amax() <= 1e-12);
    }

    #[test]
    fn hessian_is_bounded_below_by_identity(seed in 0u64..10_000) {
        let inst = random_instance(&FuzzRegime::default(), seed);
        let l = centering_operator(&inst.weights).unwrap();
        let mut h = DMatrix::identity(inst.dim, inst.dim) + l.transpose() * &l * inst.tau;
        for (k, mu) in inst.a_eigs.iter().enumerate() {
            h[(k, k)] += inst.gamma * mu.powf(-2.0 * inst.s);
        }
        prop_assert!(SymmetricEigen::new(h).eigenvalues.min() >= 1.0 - 1e-10);
    }

    #[test]
    fn minimum_grows_with_gamma(seed in 0u64..10_000, factor in 1.0f64..100.0) {
        let inst = random_instance(&FuzzRegime::default(), seed);
        let at = |g: f64| {
            let i = inst.with_gamma(g);
            functional_value(&closed_form_minimizer(&i).unwrap(), &i).unwrap()
        };
        prop_assert!(at(inst.gamma * factor) >= at(inst.gamma) - 1e-12);
    }
}
