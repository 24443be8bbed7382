//! The JSON experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use interpreg::function::FunctionSpec;
use interpreg::operator_lab::{FuzzRegime, SpectralInstance};
use interpreg::{InputMeasure, KernelSpec, MeanMode, PriorModel, SolverMode, SyntheticTask};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub f_rho: FunctionSpec,
    pub prior: FunctionSpec,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "InputMeasure::unit_interval")]
    pub input_dist: InputMeasure,
}

impl TaskConfig {
    pub fn build(&self) -> Result<SyntheticTask> {
        SyntheticTask::new(
            self.f_rho.clone(),
            PriorModel::new(self.prior.clone()),
            self.noise_sigma,
            self.input_dist.clone(),
        )
        .context("invalid task")
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRow {
    pub m: usize,
    pub epsilon: f64,
    pub big_m: f64,
    #[serde(default)]
    pub m_p: f64,
    pub covering_dim: usize,
    #[serde(rename = "radius_R")]
    pub radius_r: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertRow {
    pub m: usize,
    pub delta: f64,
    pub big_m: f64,
    #[serde(default)]
    pub m_p: f64,
    pub covering_dim: usize,
    #[serde(rename = "radius_R")]
    pub radius_r: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumRow {
    pub m_p: f64,
    pub f_sup: f64,
    pub j_norm: f64,
}

/// Monte Carlo check on the configured task and kernel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub m: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub lambda: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub inputs: Vec<BoundRow>,
    pub invert: Vec<InvertRow>,
    pub equilibrium: Vec<EquilibriumRow>,
    pub monte_carlo: Option<MonteCarloSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzSection {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub regime: FuzzRegime,
}

/// Inputs of the approximation-error bounds; the instance's `a` plays `f_ρ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSection {
    pub sigma_sq: f64,
    #[serde(default = "one")]
    pub d_nu_rho: f64,
    #[serde(default)]
    pub c_const: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub instances: Vec<SpectralInstance>,
    pub fuzz: Option<FuzzSection>,
    pub approx: Option<ApproxSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: Option<TaskConfig>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub ms: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Quadrature nodes per input axis.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub mean_mode: MeanMode,
    #[serde(default)]
    pub solver_mode: SolverMode,
    #[serde(default)]
    pub write_coefficients: bool,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
}

fn default_resolution() -> usize {
    200
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Replaces every seed in the configuration with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.seeds = vec![seed];
        if let Some(f) = self.spectral.fuzz.as_mut() {
            f.seed = seed;
        }
        if let Some(mc) = self.bounds.monte_carlo.as_mut() {
            mc.seed = seed;
        }
    }

    pub fn task(&self) -> Result<SyntheticTask> {
        match &self.task {
            Some(t) => t.build(),
            None => bail!("this command needs a `task` section"),
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let k = self.kernel.context("this command needs a `kernel`")?;
        k.validate()?;
        Ok(k)
    }

    /// Checks that the sampling grids are nonempty; `fits` also needs `λ` and `τ`.
    pub fn check_grids(&self, fits: bool) -> Result<()> {
        if self.ms.is_empty() || self.seeds.is_empty() {
            bail!("`ms` and `seeds` must be nonempty");
        }
        if fits && (self.lambdas.is_empty() || self.taus.is_empty()) {
            bail!("`lambdas` and `taus` must be nonempty");
        }
        if self.ms.contains(&0) {
            bail!("every m must be at least 1");
        }
        Ok(())
    }
}
