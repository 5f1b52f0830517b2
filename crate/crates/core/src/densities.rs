//! Log-density kernels for every distribution in the model.
//!
//! Observations follow `x ~ Dir(θ_c·1_c + 1)`. Because all but one
//! concentration entry equal one, the Dirichlet log-density collapses to
//!
//! ```text
//! log Dir(x; θ_c·1_c + 1) = −lnΓ(1 + θ_c) + lnΓ(M + θ_c) + θ_c·ln x_c
//! ```
//!
//! Gamma densities are shape-scale (`exp(−v/scale)`) and always carry their
//! full normalizer, since `κ` and `γ` are sampled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;
use crate::types::{ClassLabel, ClassPrior, HyperPriorConstants, ProbVec};

/// Shared Gamma prior over the noise parameters: `θ_m ~ Ga(kappa, gamma_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub kappa: f64,
    pub gamma_scale: f64,
}

impl HyperParams {
    pub fn new(kappa: f64, gamma_scale: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite() && gamma_scale > 0.0 && gamma_scale.is_finite()) {
            return Err(Error::Config(format!(
                "hyperparameters must be positive, got kappa={kappa}, gamma={gamma_scale}"
            )));
        }
        Ok(Self { kappa, gamma_scale })
    }
}

/// `lnΓ(M + θ) − lnΓ(1 + θ)`, the log normalizer of `Dir(θ·1_c + 1)` over `M`
/// classes. Does not depend on which class carries `θ`.
#[inline]
pub fn dirichlet_obs_log_norm(classes: usize, theta: f64) -> f64 {
    ln_gamma(classes as f64 + theta) - ln_gamma(1.0 + theta)
}

/// Log-density of `x` under `Dir(θ·1_c + 1)`.
///
/// Only `x_c` enters, so boundary points are fine unless `x_c = 0` with
/// `θ > 0`, which gives `−∞`. Clamp inputs with
/// [`ProbVec::clamp_for_log`] first.
pub fn log_dirichlet_obs(x: &ProbVec, c: ClassLabel, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    let xc = x[c.index()];
    let data = if theta == 0.0 { 0.0 } else { theta * xc.ln() };
    dirichlet_obs_log_norm(x.len(), theta) + data
}

/// Log-density of a general Dirichlet, `−ln B(α) + Σ (α_m − 1)·ln x_m`.
///
/// Terms with `α_m = 1` contribute exactly zero, so corner points are allowed
/// wherever the corresponding exponent vanishes.
pub fn log_dirichlet_generic(x: &ProbVec, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: alpha.len(),
        });
    }
    if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Config(format!(
            "Dirichlet concentration must be positive, got {a}"
        )));
    }
    let sum: f64 = alpha.iter().sum();
    let log_beta: f64 = alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(sum);
    let kernel: f64 = alpha
        .iter()
        .zip(x.as_slice())
        .filter(|(&a, _)| a != 1.0)
        .map(|(&a, &xm)| (a - 1.0) * xm.ln())
        .sum();
    Ok(kernel - log_beta)
}

/// `ln Ga(v; shape, scale) = (shape−1)·ln v − v/scale − shape·ln scale − lnΓ(shape)`.
///
/// Returns `−∞` for `v ≤ 0`.
pub fn log_gamma_density(v: f64, shape: f64, scale: f64) -> f64 {
    if v <= 0.0 || v.is_nan() {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * v.ln() - v / scale - shape * scale.ln() - ln_gamma(shape)
}

/// `ln π_c`; `−∞` for a class with zero prior mass.
pub fn log_categorical(c: ClassLabel, pi: &ClassPrior) -> f64 {
    pi.prob(c).ln()
}

/// Log of the joint `P(θ, c, κ, γ | x)` up to its normalizing constant:
///
/// `Σ_i [ln Dir(x_i; θ_{c_i}·1_{c_i} + 1) + ln π_{c_i}] + Σ_m ln Ga(θ_m; κ, γ)
///  + ln Ga(κ; β, η) + ln Ga(γ; ν, ω)`.
///
/// The hyperprior terms appear once, outside both products.
pub fn log_joint(
    obs: &[ProbVec],
    labels: &[ClassLabel],
    thetas: &[f64],
    hp: HyperParams,
    pi: &ClassPrior,
    hpc: &HyperPriorConstants,
) -> Result<f64> {
    if obs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            actual: labels.len(),
        });
    }
    let m = pi.classes();
    if thetas.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: thetas.len(),
        });
    }
    let mut total = 0.0;
    for (x, &c) in obs.iter().zip(labels) {
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: x.len(),
            });
        }
        if c.index() >= m {
            return Err(Error::LabelOutOfRange {
                label: c.index(),
                classes: m,
            });
        }
        total += log_categorical(c, pi) + log_dirichlet_obs(x, c, thetas[c.index()]);
    }
    total += thetas
        .iter()
        .map(|&t| log_gamma_density(t, hp.kappa, hp.gamma_scale))
        .sum::<f64>();
    total += log_gamma_density(hp.kappa, hpc.beta, hpc.eta);
    total += log_gamma_density(hp.gamma_scale, hpc.nu, hpc.omega);
    Ok(total)
}
