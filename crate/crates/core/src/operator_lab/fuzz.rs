//! Seeded random instances and the concurrent fuzz harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{spectral_report, SpectralInstance, SpectralReport};
use crate::error::Result;
use crate::par::{derive_seed, Execution};

/// Sampling ranges for random instances. Every `[lo, hi]` is sampled
/// uniformly; `gamma` is sampled log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzRegime {
    pub dim: [usize; 2],
    /// Eigenvalue decay `μ_k = (k + 1)^{-α}`.
    pub alpha: [f64; 2],
    pub s: [f64; 2],
    /// The ratio `r / s`.
    pub ratio: [f64; 2],
    pub tau: [f64; 2],
    pub log10_gamma: [f64; 2],
    /// `R` as a multiple of `‖A^{-s}a‖`.
    pub radius_scale: [f64; 2],
}

impl Default for FuzzRegime {
    fn default() -> Self {
        Self {
            dim: [4, 16],
            alpha: [0.5, 1.0],
            s: [0.5, 1.0],
            ratio: [0.3, 0.9],
            tau: [0.0, 2.0],
            log10_gamma: [-3.0, 0.0],
            radius_scale: [0.2, 1.0],
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws one instance; coefficients decay like `1/(k + 1)`.
pub fn random_instance(regime: &FuzzRegime, seed: u64) -> SpectralInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(regime.dim[0]..=regime.dim[1].max(regime.dim[0]));
    let alpha = uniform(&mut rng, regime.alpha);
    let s = uniform(&mut rng, regime.s);
    let r = s * uniform(&mut rng, regime.ratio);
    let tau = uniform(&mut rng, regime.tau);
    let gamma = 10f64.powf(uniform(&mut rng, regime.log10_gamma));
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // absorb the rounding of the normalization into the largest weight
    let drift = 1.0 - weights.iter().sum::<f64>();
    let top = (0..dim)
        .max_by(|&i, &j| weights[i].total_cmp(&weights[j]))
        .unwrap_or(0);
    weights[top] += drift;
    let coeffs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|k| rng.sample::<f64, _>(StandardNormal) / (k as f64 + 1.0))
            .collect()
    };
    let a_vec = coeffs(&mut rng);
    let p_vec = coeffs(&mut rng);
    let a_eigs: Vec<f64> = (0..dim).map(|k| (k as f64 + 1.0).powf(-alpha)).collect();
    let smooth_norm = a_vec
        .iter()
        .zip(&a_eigs)
        .map(|(c, m)| (c * m.powf(-s)).powi(2))
        .sum::<f64>()
        .sqrt();
    let radius_r = (smooth_norm * uniform(&mut rng, regime.radius_scale)).max(1e-6);
    SpectralInstance {
        dim,
        a_eigs,
        weights,
        a_vec,
        p_vec,
        s,
        r,
        tau,
        gamma,
        radius_r,
    }
}

/// Reports for `count` instances drawn with seeds derived from `seed`, in
/// instance order.
pub fn fuzz_reports(
    regime: &FuzzRegime,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Vec<(SpectralInstance, Result<SpectralReport>)> {
    exec.map_indexed(count, |i| {
        let inst = random_instance(regime, derive_seed(seed, i as u64));
        let report = spectral_report(&inst);
        (inst, report)
    })
}
