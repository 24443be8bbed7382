//! One function per subcommand. Each returns the files it wrote and the
//! number of rows that failed.

use std::path::PathBuf;

use anyhow::Result;
use interpreg::bounds::{
    equilibrium_constants, invert_bound_for_epsilon, monte_carlo_validate_bound,
    sample_error_confidence, BoundInputs, MonteCarloConfig, MonteCarloReport,
};
use interpreg::experiment::{
    pareto_front, run_decomposition, run_sweep, tau_monotonicity_violations, DecompositionRow,
    SweepContext, SweepPlan, SweepRow,
};
use interpreg::operator_lab::{
    approx_error_bound_eq9, random_instance, sobolev_bound_eq10, spectral_report, SpectralInstance,
    SpectralReport,
};
use interpreg::par::derive_seed;
use interpreg::solver::{fit_interpretable, FitSummary};
use interpreg::task::{quadrature_nodes, sample_dataset};
use interpreg::{Execution, FitConfig};
use nalgebra::DVector;

use crate::config::ExperimentConfig;
use crate::output::Output;

#[derive(Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

impl RunSummary {
    fn add(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    fn add_opt(&mut self, path: Option<PathBuf>) {
        self.files.extend(path);
    }
}

fn quoted(e: &str) -> String {
    format!("\"{}\"", e.replace('"', "'"))
}

fn plan(cfg: &ExperimentConfig) -> SweepPlan {
    SweepPlan {
        lambdas: cfg.lambdas.clone(),
        taus: cfg.taus.clone(),
        ms: cfg.ms.clone(),
        seeds: cfg.seeds.clone(),
    }
}

fn context(cfg: &ExperimentConfig) -> Result<SweepContext> {
    let task = cfg.task()?;
    Ok(SweepContext {
        nodes: quadrature_nodes(&task.input_dist, cfg.resolution)?,
        task,
        kernel: cfg.kernel()?,
        mean_mode: cfg.mean_mode,
        solver_mode: cfg.solver_mode,
    })
}

pub fn dataset_file(m: usize, seed: u64) -> String {
    format!("data_m{m}_seed{seed}.csv")
}

/// Writes one dataset CSV per `(m, seed)`.
pub fn gen(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    cfg.check_grids(false)?;
    let task = cfg.task()?;
    let pairs: Vec<(usize, u64)> = cfg
        .ms
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let rendered = exec.map_indexed(pairs.len(), |i| -> Result<String> {
        let (m, seed) = pairs[i];
        let ds = sample_dataset(&task, m, seed)?;
        let mut buf = Vec::new();
        ds.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    });
    let mut summary = RunSummary::default();
    for (&(m, seed), body) in pairs.iter().zip(rendered) {
        summary.add(out.csv_body(&dataset_file(m, seed), &body?)?);
    }
    Ok(summary)
}

/// Fits every `(m, seed, λ, τ)` cell and writes `fits.csv`.
pub fn fit(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    cfg.check_grids(true)?;
    let task = cfg.task()?;
    let kernel = cfg.kernel()?;
    let cells = plan(cfg).cells();
    let results = exec.map_indexed(cells.len(), |i| {
        let c = &cells[i];
        let config = FitConfig {
            lambda: c.lambda,
            tau: c.tau,
            mean_mode: cfg.mean_mode,
            solver_mode: cfg.solver_mode,
        };
        let run = || -> interpreg::Result<(FitSummary, String)> {
            let ds = sample_dataset(&task, c.m, c.seed)?;
            let fit = fit_interpretable(&ds, &task.prior, &kernel, &config)?;
            Ok((
                fit.summarize(&ds, &task.prior, &config)?,
                fit.coefficients_csv(),
            ))
        };
        (config, run())
    });
    let mut summary = RunSummary::default();
    let mut rows = Vec::with_capacity(cells.len());
    for (c, (config, result)) in cells.iter().zip(results) {
        match result {
            Ok((s, coeffs)) => {
                rows.push(format!("{},{},{},", c.m, c.seed, s.csv_row()));
                if cfg.write_coefficients {
                    let name = format!(
                        "coefficients/m{}_seed{}_lambda{}_tau{}.csv",
                        c.m, c.seed, c.lambda, c.tau
                    );
                    summary.add(out.csv_body(&name, &coeffs)?);
                }
            }
            Err(e) => {
                summary.failures += 1;
                rows.push(format!(
                    "{},{},{},{},{},NaN,NaN,NaN,NaN,NaN,false,{}",
                    c.m,
                    c.seed,
                    config.lambda,
                    config.tau,
                    config.mean_mode,
                    quoted(&e.to_string())
                ));
            }
        }
    }
    let header = format!("m,seed,{},error", FitSummary::CSV_HEADER);
    summary.add(out.csv("fits.csv", &header, rows)?);
    Ok(summary)
}

/// Writes `sweep.csv` and `pareto.csv`.
pub fn sweep(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    cfg.check_grids(true)?;
    let ctx = context(cfg)?;
    let rows = run_sweep(&ctx, &plan(cfg), exec);
    let front = pareto_front(&rows);
    for (a, b) in tau_monotonicity_violations(&rows, 1e-10) {
        let (ra, rb) = (&rows[a], &rows[b]);
        eprintln!(
            "warning: interp_variance rises from tau={} to tau={} (lambda={}, m={}, seed={}): {} -> {}",
            ra.tau, rb.tau, ra.lambda, ra.m, ra.seed, ra.interp_variance, rb.interp_variance
        );
    }
    let mut summary = RunSummary {
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        ..RunSummary::default()
    };
    summary.add(out.csv(
        "sweep.csv",
        SweepRow::CSV_HEADER,
        rows.iter().map(SweepRow::csv_row),
    )?);
    summary.add(out.csv(
        "pareto.csv",
        SweepRow::CSV_HEADER,
        front.iter().map(|&i| rows[i].csv_row()),
    )?);
    summary.add_opt(out.gnuplot(
        "sweep",
        "set xlabel 'generalization error'\nset ylabel 'interpretability variance'\nplot 'sweep.csv' using 6:7 with points title 'cells', \\\n     'pareto.csv' using 6:7 with linespoints title 'Pareto front'",
    )?);
    Ok(summary)
}

/// Writes `decompose.csv`.
pub fn decompose(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    cfg.check_grids(true)?;
    let ctx = context(cfg)?;
    let rows = run_decomposition(&ctx, &plan(cfg), exec);
    let mut summary = RunSummary {
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        ..RunSummary::default()
    };
    summary.add(out.csv(
        "decompose.csv",
        DecompositionRow::CSV_HEADER,
        rows.iter().map(DecompositionRow::csv_row),
    )?);
    summary.add_opt(out.gnuplot(
        "decompose",
        "set xlabel 'm'\nset ylabel 'sample error'\nset logscale x\nplot 'decompose.csv' using 4:9 with points title 'sample error'",
    )?);
    Ok(summary)
}

fn mc_inputs_row(rep: &MonteCarloReport) -> String {
    rep.inputs.csv_row(&rep.bound)
}

/// Writes `bounds.csv` and, when configured, `inversion.csv`,
/// `equilibrium.csv` and `monte_carlo.csv`.
pub fn bounds(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    let b = &cfg.bounds;
    let mut summary = RunSummary::default();
    let mut rows = Vec::new();
    for row in &b.inputs {
        let inputs = BoundInputs {
            m: row.m,
            epsilon: row.epsilon,
            big_m: row.big_m,
            m_p: row.m_p,
            covering_dim: row.covering_dim,
            radius_r: row.radius_r,
            delta: row.delta,
        };
        match sample_error_confidence(&inputs) {
            Ok(c) => rows.push(inputs.csv_row(&c)),
            Err(e) => {
                summary.failures += 1;
                eprintln!("bounds row {inputs:?}: {e}");
            }
        }
    }
    if let Some(mc) = &b.monte_carlo {
        let task = cfg.task()?;
        let kernel = cfg.kernel()?;
        let config = MonteCarloConfig {
            m: mc.m,
            epsilon: mc.epsilon,
            trials: mc.trials,
            seed: mc.seed,
            resolution: cfg.resolution,
        };
        let rep = monte_carlo_validate_bound(
            &task,
            &kernel,
            &FitConfig::new(mc.lambda, mc.tau),
            &config,
            exec,
        )?;
        rows.push(mc_inputs_row(&rep));
        summary.failures += rep.failures;
        summary.add(out.csv(
            "monte_carlo.csv",
            MonteCarloReport::CSV_HEADER,
            [rep.csv_row()],
        )?);
    }
    summary.add(out.csv("bounds.csv", BoundInputs::CSV_HEADER, rows)?);

    if !b.invert.is_empty() {
        let mut inv = Vec::new();
        for r in &b.invert {
            match invert_bound_for_epsilon(r.m, r.delta, r.big_m, r.m_p, r.covering_dim, r.radius_r)
            {
                Ok(eps) => inv.push(format!(
                    "{},{},{},{},{},{},{eps}",
                    r.m, r.delta, r.big_m, r.m_p, r.covering_dim, r.radius_r
                )),
                Err(e) => {
                    summary.failures += 1;
                    eprintln!("inversion row {r:?}: {e}");
                }
            }
        }
        summary.add(out.csv("inversion.csv", "m,delta,M,Mp,d,R,epsilon", inv)?);
    }
    if !b.equilibrium.is_empty() {
        let mut eq = Vec::new();
        for r in &b.equilibrium {
            match equilibrium_constants(r.m_p, r.f_sup, r.j_norm) {
                Ok(e) => eq.push(format!(
                    "{},{},{},{},{},{},{},{}",
                    r.m_p,
                    r.f_sup,
                    r.j_norm,
                    e.discriminant,
                    e.m_star,
                    e.r_star,
                    e.feasible,
                    e.warning
                )),
                Err(e) => {
                    summary.failures += 1;
                    eprintln!("equilibrium row {r:?}: {e}");
                }
            }
        }
        summary.add(out.csv(
            "equilibrium.csv",
            "m_p,f_sup,j_norm,discriminant,m_star,r_star,feasible,warning",
            eq,
        )?);
    }
    summary.add_opt(out.gnuplot(
        "bounds",
        "set xlabel 'm'\nset ylabel 'raw confidence'\nset logscale x\nplot 'bounds.csv' using 1:7 with points title 'raw confidence'",
    )?);
    Ok(summary)
}

/// Writes `spectral.csv`, the instances as JSON, and `spectral_approx.csv`
/// when approximation-bound inputs are configured.
pub fn spectral(cfg: &ExperimentConfig, out: &Output, exec: Execution) -> Result<RunSummary> {
    let s = &cfg.spectral;
    let mut instances: Vec<SpectralInstance> = s.instances.clone();
    if let Some(f) = &s.fuzz {
        instances.extend(
            (0..f.count).map(|i| random_instance(&f.regime, derive_seed(f.seed, i as u64))),
        );
    }
    let reports: Vec<interpreg::Result<SpectralReport>> =
        exec.map_indexed(instances.len(), |i| spectral_report(&instances[i]));
    let mut summary = RunSummary::default();
    let mut rows = Vec::new();
    for (i, (inst, rep)) in instances.iter().zip(&reports).enumerate() {
        match rep {
            Ok(r) => rows.push(r.csv_row(inst)),
            Err(e) => {
                summary.failures += 1;
                eprintln!("spectral instance {i}: {e}");
            }
        }
    }
    summary.add(out.csv("spectral.csv", SpectralReport::CSV_HEADER, rows)?);
    summary.add(out.json("spectral_instances.json", &instances)?);

    if let Some(a) = &s.approx {
        let mut rows = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let f_rho = DVector::from_column_slice(&inst.a_vec);
            let p = DVector::from_column_slice(&inst.p_vec);
            let general = approx_error_bound_eq9(inst, &f_rho, &p, a.sigma_sq, a.d_nu_rho);
            let sobolev = a
                .c_const
                .map(|c| sobolev_bound_eq10(inst, &f_rho, &p, a.sigma_sq, a.d_nu_rho, Some(c)));
            let general = match general {
                Ok(g) => g,
                Err(e) => {
                    summary.failures += 1;
                    eprintln!("approximation bound, instance {i}: {e}");
                    continue;
                }
            };
            let threshold = |t: Option<f64>| t.map_or("NaN".to_string(), |v| v.to_string());
            let (sob_rhs, sob_thr) = match sobolev {
                None => ("NaN".to_string(), "NaN".to_string()),
                Some(Ok(b)) => (b.rhs.to_string(), threshold(b.gamma_threshold)),
                Some(Err(e)) => {
                    summary.failures += 1;
                    eprintln!("Sobolev bound, instance {i}: {e}");
                    continue;
                }
            };
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{},{},{sob_rhs},{sob_thr}",
                inst.dim,
                inst.s,
                inst.r,
                inst.tau,
                inst.gamma,
                inst.radius_r,
                a.sigma_sq,
                a.d_nu_rho,
                a.c_const.map_or(String::new(), |c| c.to_string()),
                general.rhs,
                threshold(general.gamma_threshold),
            ));
        }
        summary.add(out.csv(
            "spectral_approx.csv",
            "N,s,r,tau,gamma,R,sigma_sq,d_nu_rho,C,approx_rhs,approx_gamma_threshold,sobolev_rhs,sobolev_gamma_threshold",
            rows,
        )?);
    }
    summary.add_opt(out.gnuplot(
        "spectral",
        "set xlabel 'minimum of the functional'\nset ylabel 'bound'\nset logscale xy\nplot 'spectral.csv' using 6:7 with points title 'instances', x with lines title 'equality'",
    )?);
    Ok(summary)
}
