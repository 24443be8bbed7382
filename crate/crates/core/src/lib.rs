//! Interpretability-regularized kernel regression.
//!
//! The learner minimizes empirical squared loss plus an RKHS penalty plus a
//! penalty on the variance of the gap between the model and a user-supplied
//! prior model `P(x)`. Around the solver sit the numerical checks for the
//! associated error decomposition, the covering-number confidence bound, the
//! spectral approximation-error bounds, and the equilibrium constants.
//!
//! Module map:
//!
//! - [`task`]: synthetic tasks, input measures, datasets and quadrature.
//! - [`function`]: the catalog of evaluable functions used for `f_rho` and `P`.
//! - [`kernel`]: kernels, Gram matrices, hypotheses in representer form.
//! - [`metric`]: mean error and error variance against the prior model.
//! - [`solver`]: Tikhonov and interpretability-regularized fits, error decomposition.
//! - [`operator_lab`]: the truncated compact-operator setting and its bounds.
//! - [`bounds`]: sample-error confidence bound, Monte Carlo validation, equilibrium constants.
//! - [`experiment`]: grid sweeps and Pareto filtering.

pub mod bounds;
pub mod descent;
pub mod error;
pub mod experiment;
pub mod function;
pub mod kernel;
pub mod metric;
pub mod operator_lab;
pub mod par;
pub mod solver;
pub mod task;

pub use error::{Error, Result};
pub use function::{FunctionSpec, RealFunction};
pub use kernel::{GramMatrix, Hypothesis, JitterPolicy, KernelSpec};
pub use metric::{MetricForm, MetricReport};
pub use par::Execution;
pub use solver::{FitConfig, FitResult, MeanMode, SolverMode};
pub use task::{Dataset, InputMeasure, Node, PriorModel, SyntheticTask};
