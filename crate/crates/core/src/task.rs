//! Synthetic regression tasks, input measures, datasets and quadrature.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{FunctionSpec, RealFunction};

/// Tolerance on the total mass of a discrete probability vector.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Largest quadrature grid we are willing to materialize.
const MAX_NODES: usize = 10_000_000;

/// The prior ("cognitive") model `P(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorModel {
    pub spec: FunctionSpec,
}

impl PriorModel {
    pub fn new(spec: FunctionSpec) -> Self {
        Self { spec }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.spec.eval(x)
    }
}

impl RealFunction for PriorModel {
    fn value(&self, x: &[f64]) -> f64 {
        self.spec.eval(x)
    }
}

/// Marginal distribution of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMeasure {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    DiscreteGrid {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl InputMeasure {
    pub fn unit_interval() -> Self {
        InputMeasure::UniformBox {
            lower: vec![0.0],
            upper: vec![1.0],
        }
    }

    pub fn unit_cube(dim: usize) -> Self {
        InputMeasure::UniformBox {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputMeasure::UniformBox { lower, .. } => lower.len(),
            InputMeasure::DiscreteGrid { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputMeasure::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::invalid(
                        "box bounds must be nonempty and of equal length",
                    ));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
                {
                    return Err(Error::invalid(
                        "box requires finite lower < upper on every axis",
                    ));
                }
                Ok(())
            }
            InputMeasure::DiscreteGrid { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::invalid(
                        "discrete measure needs aligned nonempty points and weights",
                    ));
                }
                let dim = points[0].len();
                if dim == 0 {
                    return Err(Error::invalid("points must have positive dimension"));
                }
                if let Some(p) = points.iter().find(|p| p.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.len(),
                    });
                }
                check_probability_vector(weights)
            }
        }
    }
}

/// Checks that `weights` is nonnegative and sums to one within [`PROBABILITY_SUM_TOL`].
pub fn check_probability_vector(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Ground truth for a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub f_rho: FunctionSpec,
    pub prior: PriorModel,
    pub noise_sigma: f64,
    pub input_dist: InputMeasure,
    pub domain_dim: usize,
}

impl SyntheticTask {
    pub fn new(
        f_rho: FunctionSpec,
        prior: PriorModel,
        noise_sigma: f64,
        input_dist: InputMeasure,
    ) -> Result<Self> {
        let task = Self {
            f_rho,
            prior,
            noise_sigma,
            domain_dim: input_dist.dim(),
            input_dist,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        self.input_dist.validate()?;
        if self.domain_dim == 0 || self.domain_dim != self.input_dist.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dist.dim(),
                found: self.domain_dim,
            });
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid("noise_sigma must be finite and nonnegative"));
        }
        self.f_rho.validate(self.domain_dim)?;
        self.prior.spec.validate(self.domain_dim)
    }

    /// Noise variance `σ_ρ²`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_sigma * self.noise_sigma
    }
}

/// `m` input/output pairs drawn from a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub seed: u64,
    pub m: usize,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, seed: u64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "dataset needs m >= 1 aligned pairs, got {} inputs and {} outputs",
                xs.len(),
                ys.len()
            )));
        }
        let dim = xs[0].len();
        if let Some(x) = xs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        let m = xs.len();
        Ok(Self { xs, ys, seed, m })
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    /// Writes the dataset as CSV with header `x_0,...,x_{n-1},y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x_{j}")).collect();
        header.push("y".to_string());
        wtr.write_record(&header)?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
            row.push(y.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: std::io::Read>(input: R, seed: u64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let vals: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let (y, x) = vals
                .split_last()
                .ok_or_else(|| Error::invalid("empty CSV row"))?;
            xs.push(x.to_vec());
            ys.push(*y);
        }
        Dataset::new(xs, ys, seed)
    }
}

/// Draws `m` i.i.d. pairs from `task`; identical arguments give identical data.
pub fn sample_dataset(task: &SyntheticTask, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::invalid("sample count m must be at least 1"));
    }
    task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = match &task.input_dist {
        InputMeasure::UniformBox { lower, upper } => (0..m)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| rng.random_range(*l..*u))
                    .collect()
            })
            .collect(),
        InputMeasure::DiscreteGrid { points, weights } => {
            let dist = WeightedIndex::new(weights)
                .map_err(|e| Error::invalid(format!("discrete weights: {e}")))?;
            (0..m)
                .map(|_| points[dist.sample(&mut rng)].clone())
                .collect()
        }
    };
    let noise = if task.noise_sigma > 0.0 {
        Some(Normal::new(0.0, task.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let mut ys = Vec::with_capacity(m);
    for x in &xs {
        let f = task.f_rho.eval(x);
        if !f.is_finite() {
            return Err(Error::NonFinite {
                what: "f_rho",
                point: x.clone(),
                value: f,
            });
        }
        ys.push(match &noise {
            Some(n) => f + n.sample(&mut rng),
            None => f,
        });
    }
    Dataset::new(xs, ys, seed)
}

/// A quadrature node: a point and its probability weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Deterministic finite realization of `∫·dρ_X`.
///
/// Uniform boxes get the tensor midpoint rule with `resolution` nodes per axis;
/// discrete measures are returned as given.
pub fn quadrature_nodes(measure: &InputMeasure, resolution: usize) -> Result<Vec<Node>> {
    if resolution == 0 {
        return Err(Error::invalid("quadrature resolution must be at least 1"));
    }
    measure.validate()?;
    match measure {
        InputMeasure::UniformBox { lower, upper } => {
            let dim = lower.len();
            let count = u32::try_from(dim)
                .ok()
                .and_then(|d| resolution.checked_pow(d))
                .filter(|&n| n <= MAX_NODES)
                .ok_or_else(|| Error::invalid("quadrature grid too large"))?;
            let weight = 1.0 / count as f64;
            let axes: Vec<Vec<f64>> = lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let h = (u - l) / resolution as f64;
                    (0..resolution).map(|i| l + (i as f64 + 0.5) * h).collect()
                })
                .collect();
            let mut nodes = Vec::with_capacity(count);
            let mut idx = vec![0usize; dim];
            for _ in 0..count {
                nodes.push(Node {
                    point: idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect(),
                    weight,
                });
                for slot in idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < resolution {
                        break;
                    }
                    *slot = 0;
                }
            }
            Ok(nodes)
        }
        InputMeasure::DiscreteGrid { points, weights } => Ok(points
            .iter()
            .zip(weights)
            .map(|(p, w)| Node {
                point: p.clone(),
                weight: *w,
            })
            .collect()),
    }
}
