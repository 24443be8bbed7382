//! Kernels, Gram matrices and hypotheses in representer form.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::RealFunction;

/// Absolute tolerance below zero for quadratic forms that are PSD in exact arithmetic.
/// Smallest accepted squared Cholesky pivot relative to the largest diagonal entry.
const PIVOT_RTOL: f64 = 1e-14;

pub const PSD_TOL: f64 = 1e-10;

/// Eigenvalue cut-off used for the effective dimension of a Gram matrix.
pub const EFFECTIVE_DIM_CUTOFF: f64 = 1e-10;

/// A positive semidefinite kernel.
///
/// Config strings: `gaussian:width=0.5`, `poly:degree=2,offset=1`, `linear`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    /// `exp(-‖x - y‖² / (2·width²))`
    Gaussian { width: f64 },
    /// `(⟨x, y⟩ + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `⟨x, y⟩`
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { width } if !(width > 0.0) || !width.is_finite() => {
                Err(Error::invalid("gaussian width must be positive"))
            }
            KernelSpec::Polynomial { degree, offset } if degree == 0 || !(offset >= 0.0) => Err(
                Error::invalid("polynomial kernel needs degree >= 1 and offset >= 0"),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { width } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// `sup_x sqrt(K(x, x))` for translation-invariant kernels, else `None`.
    pub fn sup_diagonal(&self) -> Option<f64> {
        match self {
            KernelSpec::Gaussian { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Raw kernel matrix `K_ij = K(points_i, points_j)`, symmetric by construction.
    pub fn matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Cross matrix `K_ij = K(rows_i, cols_j)`.
    pub fn cross_matrix(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.eval(&rows[i], &cols[j]))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian { width } => write!(f, "gaussian:width={width}"),
            KernelSpec::Polynomial { degree, offset } => {
                write!(f, "poly:degree={degree},offset={offset}")
            }
            KernelSpec::Linear => write!(f, "linear"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut width = None;
        let mut degree = None;
        let mut offset = None;
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                Error::invalid(format!("kernel parameter {kv:?} is not key=value"))
            })?;
            let bad = |e: &dyn fmt::Display| Error::invalid(format!("kernel parameter {key}: {e}"));
            match key.trim() {
                "width" => width = Some(value.trim().parse::<f64>().map_err(|e| bad(&e))?),
                "degree" => degree = Some(value.trim().parse::<u32>().map_err(|e| bad(&e))?),
                "offset" => offset = Some(value.trim().parse::<f64>().map_err(|e| bad(&e))?),
                other => {
                    return Err(Error::invalid(format!(
                        "unknown kernel parameter {other:?}"
                    )))
                }
            }
        }
        let spec = match name {
            "gaussian" => KernelSpec::Gaussian {
                width: width.ok_or_else(|| Error::invalid("gaussian kernel needs width"))?,
            },
            "poly" | "polynomial" => KernelSpec::Polynomial {
                degree: degree.ok_or_else(|| Error::invalid("poly kernel needs degree"))?,
                offset: offset.unwrap_or(0.0),
            },
            "linear" => KernelSpec::Linear,
            other => return Err(Error::invalid(format!("unknown kernel {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

/// Diagonal jitter escalation for near-singular factorizations.
///
/// The first attempt uses no jitter; then `start`, `start·factor`, ... up to `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub start: f64,
    pub max: f64,
    pub factor: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            start: 1e-12,
            max: 1e-3,
            factor: 10.0,
        }
    }
}

impl JitterPolicy {
    fn schedule(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = Some(0.0);
        std::iter::from_fn(move || {
            let cur = next?;
            let following = if cur == 0.0 {
                self.start
            } else {
                cur * self.factor
            };
            // relative slack so 1e-12·10^9 still reaches the 1e-3 cap
            next = (following <= self.max * (1.0 + 1e-9)).then_some(following);
            Some(cur)
        })
    }

    /// Cholesky of `matrix + jitter·I` for the smallest jitter in the schedule that works.
    pub fn factor(&self, matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
        for jitter in self.schedule() {
            let mut m = matrix.clone();
            if jitter > 0.0 {
                for i in 0..m.nrows() {
                    m[(i, i)] += jitter;
                }
            }
            let scale = m.diagonal().amax();
            if let Some(chol) = Cholesky::new(m) {
                // rounding can leave a tiny positive pivot on a singular matrix
                let pivot = chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .fold(f64::INFINITY, |a, v| a.min(v * v));
                if pivot > PIVOT_RTOL * scale {
                    return Ok((chol, jitter));
                }
            }
        }
        Err(Error::Conditioning {
            max_jitter: self.max,
        })
    }
}

/// A kernel matrix together with a positive-definite factorization.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    /// Un-jittered entries `K(x_i, x_j)`.
    pub entries: DMatrix<f64>,
    /// Diagonal jitter that made the factorization succeed.
    pub jitter: f64,
    factor: Cholesky<f64, Dyn>,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Factor of `entries + jitter·I`.
    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.factor
    }

    /// Largest asymmetry `|K_ij - K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }
}

/// Builds the Gram matrix of `points`, escalating jitter until it factors.
pub fn gram_matrix(
    kernel: &KernelSpec,
    points: &[Vec<f64>],
    policy: JitterPolicy,
) -> Result<GramMatrix> {
    kernel.validate()?;
    if points.is_empty() {
        return Err(Error::invalid("gram matrix needs at least one point"));
    }
    let entries = kernel.matrix(points);
    let (factor, jitter) = policy.factor(&entries)?;
    Ok(GramMatrix {
        entries,
        jitter,
        factor,
    })
}

/// Number of eigenvalues of `k` above [`EFFECTIVE_DIM_CUTOFF`].
pub fn effective_dimension(k: &DMatrix<f64>) -> usize {
    SymmetricEigen::new(k.clone())
        .eigenvalues
        .iter()
        .filter(|&&e| e > EFFECTIVE_DIM_CUTOFF)
        .count()
}

/// `f = Σ_i coeffs_i·K(centers_i, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub coeffs: DVector<f64>,
    pub centers: Vec<Vec<f64>>,
    pub kernel: KernelSpec,
}

impl Hypothesis {
    pub fn new(coeffs: DVector<f64>, centers: Vec<Vec<f64>>, kernel: KernelSpec) -> Result<Self> {
        if coeffs.len() != centers.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs,
            centers,
            kernel,
        })
    }

    pub fn zero(centers: Vec<Vec<f64>>, kernel: KernelSpec) -> Self {
        Self {
            coeffs: DVector::zeros(centers.len()),
            centers,
            kernel,
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.centers.first().map(Vec::len)
    }

    /// `Σ_i c_i K(center_i, x)`, checking the input dimension.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if let Some(dim) = self.input_dim() {
            if dim != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
        }
        Ok(self.value(x))
    }

    pub fn evaluate_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

impl RealFunction for Hypothesis {
    fn value(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(self.coeffs.iter())
            .map(|(c, a)| a * self.kernel.eval(c, x))
            .sum()
    }
}

/// `‖f‖²_K = cᵀ K c`, clamped at zero when within [`PSD_TOL`] below it.
pub fn rkhs_norm_sq(h: &Hypothesis, gram: &GramMatrix) -> Result<f64> {
    if gram.dim() != h.coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: gram.dim(),
            found: h.coeffs.len(),
        });
    }
    quadratic_form(&gram.entries, &h.coeffs)
}

pub(crate) fn quadratic_form(k: &DMatrix<f64>, c: &DVector<f64>) -> Result<f64> {
    let v = c.dot(&(k * c));
    if v < -PSD_TOL * (1.0 + c.norm_squared() * k.amax()) {
        return Err(Error::Domain(format!("quadratic form {v:e} is negative")));
    }
    Ok(v.max(0.0))
}
