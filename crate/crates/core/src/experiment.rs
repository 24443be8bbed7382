//! `(λ, τ)` grid sweeps and Pareto filtering.
//!
//! Each cell samples a dataset, fits it, and reports population quantities
//! from quadrature. The sample and approximation errors come from the
//! decomposition against the class minimizer `f_H` for the cell's `(λ, τ)`,
//! with the empirical fit constrained to the ball `‖f‖_K <= ‖f_H‖_K`.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::Result;
use crate::kernel::{quadratic_form, Hypothesis, KernelSpec};
use crate::metric::population_metric;
use crate::par::Execution;
use crate::solver::{
    class_minimizer, error_decomposition, fit_in_ball, fit_interpretable, DecompositionReport,
    FitConfig, MeanMode, SolverMode,
};
use crate::task::{sample_dataset, Node, SyntheticTask};

/// Grid of sweep cells. Cells run in the order `m`, `seed`, `λ`, `τ`, with
/// `τ` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub tau: f64,
    pub m: usize,
    pub seed: u64,
}

impl SweepPlan {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::with_capacity(
            self.ms.len() * self.seeds.len() * self.lambdas.len() * self.taus.len(),
        );
        for &m in &self.ms {
            for &seed in &self.seeds {
                for &lambda in &self.lambdas {
                    for &tau in &self.taus {
                        out.push(SweepCell {
                            lambda,
                            tau,
                            m,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub tau: f64,
    pub m: usize,
    pub seed: u64,
    pub empirical_risk: f64,
    /// `∫(f - f_ρ)² dρ_X + σ²`.
    pub generalization_error: f64,
    /// Population variance of `f - P`.
    pub interp_variance: f64,
    pub rkhs_norm_sq: f64,
    pub sample_error: f64,
    pub approx_error: f64,
    /// Set when the cell failed; the numeric fields are then `NaN`.
    pub error: Option<String>,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "lambda,tau,m,seed,empirical_risk,generalization_error,interp_variance,rkhs_norm_sq,sample_error,approx_error,error";

    fn failed(cell: &SweepCell, msg: String) -> Self {
        Self {
            lambda: cell.lambda,
            tau: cell.tau,
            m: cell.m,
            seed: cell.seed,
            empirical_risk: f64::NAN,
            generalization_error: f64::NAN,
            interp_variance: f64::NAN,
            rkhs_norm_sq: f64::NAN,
            sample_error: f64::NAN,
            approx_error: f64::NAN,
            error: Some(msg),
        }
    }

    pub fn csv_row(&self) -> String {
        let err = self
            .error
            .as_deref()
            .map(|e| format!("\"{}\"", e.replace('"', "'")))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            self.tau,
            self.m,
            self.seed,
            self.empirical_risk,
            self.generalization_error,
            self.interp_variance,
            self.rkhs_norm_sq,
            self.sample_error,
            self.approx_error,
            err
        )
    }
}

/// Everything a cell needs besides its grid coordinates.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub task: SyntheticTask,
    pub kernel: KernelSpec,
    pub mean_mode: MeanMode,
    pub solver_mode: SolverMode,
    pub nodes: Vec<Node>,
}

struct ClassMinimizer {
    hypothesis: Hypothesis,
    radius: f64,
}

fn class_minimizer_for(ctx: &SweepContext, lambda: f64, tau: f64) -> Result<ClassMinimizer> {
    let fh = class_minimizer(
        &ctx.task,
        &ctx.kernel,
        &FitConfig::new(lambda, tau),
        &ctx.nodes,
    )?;
    let radius = quadratic_form(
        &ctx.kernel.matrix(&fh.hypothesis.centers),
        &fh.hypothesis.coeffs,
    )?
    .sqrt();
    Ok(ClassMinimizer {
        hypothesis: fh.hypothesis,
        radius,
    })
}

fn run_cell(ctx: &SweepContext, cell: &SweepCell, fh: &ClassMinimizer) -> Result<SweepRow> {
    let config = FitConfig {
        lambda: cell.lambda,
        tau: cell.tau,
        mean_mode: ctx.mean_mode,
        solver_mode: ctx.solver_mode,
    };
    let ds = sample_dataset(&ctx.task, cell.m, cell.seed)?;
    let fit = fit_interpretable(&ds, &ctx.task.prior, &ctx.kernel, &config)?;
    let summary = fit.summarize(&ds, &ctx.task.prior, &config)?;
    let population = population_metric(&fit.hypothesis, &ctx.task.prior, &ctx.nodes)?;
    let generalization =
        crate::solver::generalization_error(&fit.hypothesis, &ctx.task, &ctx.nodes)?;
    let rep = decompose_cell(ctx, cell, fh)?;
    Ok(SweepRow {
        lambda: cell.lambda,
        tau: cell.tau,
        m: cell.m,
        seed: cell.seed,
        empirical_risk: summary.empirical_risk,
        generalization_error: generalization,
        interp_variance: population.variance,
        rkhs_norm_sq: summary.rkhs_norm_sq,
        sample_error: rep.sample,
        approx_error: rep.approx,
        error: None,
    })
}

fn distinct_pairs(plan: &SweepPlan) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for &l in &plan.lambdas {
        for &t in &plan.taus {
            if !pairs
                .iter()
                .any(|&(a, b)| a.to_bits() == l.to_bits() && b.to_bits() == t.to_bits())
            {
                pairs.push((l, t));
            }
        }
    }
    pairs
}

/// Runs every cell; failures become rows with the `error` field set. Rows
/// come back in [`SweepPlan::cells`] order regardless of scheduling.
pub fn run_sweep(ctx: &SweepContext, plan: &SweepPlan, exec: Execution) -> Vec<SweepRow> {
    let pairs = distinct_pairs(plan);
    let minimizers = exec.map_indexed(pairs.len(), |i| {
        class_minimizer_for(ctx, pairs[i].0, pairs[i].1).map_err(|e| e.to_string())
    });
    let lookup: HashMap<(u64, u64), &std::result::Result<ClassMinimizer, String>> = pairs
        .iter()
        .zip(&minimizers)
        .map(|(&(l, t), m)| ((l.to_bits(), t.to_bits()), m))
        .collect();
    let cells = plan.cells();
    exec.map_indexed(cells.len(), |i| {
        let cell = &cells[i];
        match lookup[&(cell.lambda.to_bits(), cell.tau.to_bits())] {
            Ok(fh) => {
                run_cell(ctx, cell, fh).unwrap_or_else(|e| SweepRow::failed(cell, e.to_string()))
            }
            Err(e) => SweepRow::failed(cell, format!("class minimizer: {e}")),
        }
    })
}

/// One row of a decomposition run. Rows for the class minimizer itself
/// have `m` and `seed` unset.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub lambda: f64,
    pub tau: f64,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    /// `‖f_H‖_K`, the radius of the ball the empirical fit is held to.
    pub radius: f64,
    pub report: Option<DecompositionReport>,
    pub error: Option<String>,
}

impl DecompositionRow {
    pub const CSV_HEADER: &'static str = "source,lambda,tau,m,seed,radius,total,approx,sample,identity_residual,generalization,interp_variance,error";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let source = if self.m.is_some() {
            "fit"
        } else {
            "class_minimizer"
        };
        let nums = match &self.report {
            Some(r) => format!(
                "{},{},{},{},{},{}",
                r.total,
                r.approx,
                r.sample,
                r.identity_residual,
                r.generalization,
                r.interp_variance
            ),
            None => "NaN,NaN,NaN,NaN,NaN,NaN".to_string(),
        };
        let err = self
            .error
            .as_deref()
            .map(|e| format!("\"{}\"", e.replace('"', "'")))
            .unwrap_or_default();
        format!(
            "{source},{},{},{},{},{},{nums},{err}",
            self.lambda,
            self.tau,
            opt(self.m.map(|m| m.to_string())),
            opt(self.seed.map(|s| s.to_string())),
            self.radius
        )
    }
}

/// Decomposes ball-constrained fits for every plan cell against the class
/// minimizer of the cell's `(λ, τ)`. For each distinct `(λ, τ)` a row for
/// `f = f_H` comes first.
pub fn run_decomposition(
    ctx: &SweepContext,
    plan: &SweepPlan,
    exec: Execution,
) -> Vec<DecompositionRow> {
    let pairs = distinct_pairs(plan);
    let minimizers = exec.map_indexed(pairs.len(), |i| {
        class_minimizer_for(ctx, pairs[i].0, pairs[i].1)
    });
    let mut rows: Vec<DecompositionRow> = pairs
        .iter()
        .zip(&minimizers)
        .map(|(&(lambda, tau), fh)| {
            let (radius, report, error) = match fh {
                Ok(fh) => match error_decomposition(
                    &fh.hypothesis,
                    &ctx.task,
                    &fh.hypothesis,
                    &ctx.nodes,
                    tau,
                ) {
                    Ok(r) => (fh.radius, Some(r), None),
                    Err(e) => (fh.radius, None, Some(e.to_string())),
                },
                Err(e) => (f64::NAN, None, Some(format!("class minimizer: {e}"))),
            };
            DecompositionRow {
                lambda,
                tau,
                m: None,
                seed: None,
                radius,
                report,
                error,
            }
        })
        .collect();
    let cells = plan.cells();
    let index = |cell: &SweepCell| {
        pairs
            .iter()
            .position(|&(l, t)| {
                l.to_bits() == cell.lambda.to_bits() && t.to_bits() == cell.tau.to_bits()
            })
            .expect("every cell has its pair")
    };
    rows.extend(exec.map_indexed(cells.len(), |i| {
        let cell = &cells[i];
        let mut row = DecompositionRow {
            lambda: cell.lambda,
            tau: cell.tau,
            m: Some(cell.m),
            seed: Some(cell.seed),
            radius: f64::NAN,
            report: None,
            error: None,
        };
        let outcome = match &minimizers[index(cell)] {
            Ok(fh) => {
                row.radius = fh.radius;
                decompose_cell(ctx, cell, fh).map_err(|e| e.to_string())
            }
            Err(e) => Err(format!("class minimizer: {e}")),
        };
        match outcome {
            Ok(r) => row.report = Some(r),
            Err(e) => row.error = Some(e),
        }
        row
    }));
    rows
}

fn decompose_cell(
    ctx: &SweepContext,
    cell: &SweepCell,
    fh: &ClassMinimizer,
) -> Result<DecompositionReport> {
    let ds = sample_dataset(&ctx.task, cell.m, cell.seed)?;
    let ball = fit_in_ball(
        &ds,
        &ctx.task.prior,
        &ctx.kernel,
        &FitConfig::new(cell.lambda, cell.tau),
        fh.radius.max(f64::MIN_POSITIVE),
    )?;
    error_decomposition(
        &ball.fit.hypothesis,
        &ctx.task,
        &fh.hypothesis,
        &ctx.nodes,
        cell.tau,
    )
}

/// Indices of rows not dominated under joint minimization of
/// `(generalization_error, interp_variance)`. Failed rows are skipped.
pub fn pareto_front(rows: &[SweepRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len())
        .filter(|&i| {
            rows[i].error.is_none()
                && rows[i].generalization_error.is_finite()
                && rows[i].interp_variance.is_finite()
        })
        .collect();
    let key = |i: usize| (rows[i].generalization_error, rows[i].interp_variance);
    order.sort_by(|&a, &b| {
        let (ga, va) = key(a);
        let (gb, vb) = key(b);
        ga.partial_cmp(&gb)
            .unwrap_or(Ordering::Equal)
            .then(va.partial_cmp(&vb).unwrap_or(Ordering::Equal))
    });
    let mut front = Vec::new();
    let mut best = f64::INFINITY;
    let mut start = 0;
    while start < order.len() {
        let g = key(order[start]).0;
        let mut end = start;
        while end < order.len() && key(order[end]).0 == g {
            end += 1;
        }
        // the group is sorted by variance, so its minimum comes first
        let group_min = key(order[start]).1;
        if group_min < best {
            front.extend(
                order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| key(i).1 == group_min),
            );
            best = group_min;
        }
        start = end;
    }
    front.sort_unstable();
    front
}

/// Positions where `interp_variance` rises by more than `slack` as `τ` grows
/// with `(λ, m, seed)` held fixed. Returns pairs of row indices.
pub fn tau_monotonicity_violations(rows: &[SweepRow], slack: f64) -> Vec<(usize, usize)> {
    let mut groups: HashMap<(u64, usize, u64), Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.error.is_none() {
            groups
                .entry((r.lambda.to_bits(), r.m, r.seed))
                .or_default()
                .push(i);
        }
    }
    let mut out = Vec::new();
    for idx in groups.values_mut() {
        idx.sort_by(|&a, &b| {
            rows[a]
                .tau
                .partial_cmp(&rows[b].tau)
                .unwrap_or(Ordering::Equal)
        });
        for w in idx.windows(2) {
            if rows[w[1]].interp_variance > rows[w[0]].interp_variance + slack {
                out.push((w[0], w[1]));
            }
        }
    }
    out.sort_unstable();
    out
}
