//! Shared domain types: simplex points, class labels, priors and the seeded
//! random source.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for in-process simplex validation.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Tolerance applied to probability vectors read from files. Real pipelines
/// emit rounded probabilities, so these are renormalized instead of rejected.
pub const IO_TOL: f64 = 1e-6;

/// Default floor used before taking `log x`.
pub const LOG_FLOOR: f64 = 1e-12;

/// The random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// A point in the (M−1)-simplex: `M ≥ 2` non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    /// Validates `raw` against the simplex with tolerance `tol`.
    ///
    /// Entries in `[-tol, 0)` are clamped to zero and the result is
    /// renormalized, so the returned vector sums to one up to rounding.
    pub fn validate(raw: &[f64], tol: f64) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidProbVec(format!(
                "need at least 2 entries, got {}",
                raw.len()
            )));
        }
        if let Some((i, v)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidProbVec(format!("entry {i} is not finite ({v})")));
        }
        if let Some((i, v)) = raw.iter().enumerate().find(|(_, &v)| v < -tol) {
            return Err(Error::InvalidProbVec(format!("entry {i} is negative ({v})")));
        }
        let clamped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidProbVec(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self(clamped.into_iter().map(|v| v / sum).collect()))
    }

    /// Validates with the in-process tolerance [`SIMPLEX_TOL`].
    pub fn new(raw: &[f64]) -> Result<Self> {
        Self::validate(raw, SIMPLEX_TOL)
    }

    /// Validates with the looser file-input tolerance [`IO_TOL`].
    pub fn from_io(raw: &[f64]) -> Result<Self> {
        Self::validate(raw, IO_TOL)
    }

    /// The uniform point `(1/M, …, 1/M)`.
    pub fn uniform(m: usize) -> Self {
        assert!(m >= 2, "a probability vector needs at least two classes");
        Self(vec![1.0 / m as f64; m])
    }

    /// Wraps entries already known to lie on the simplex.
    pub(crate) fn from_vec_unchecked(v: Vec<f64>) -> Self {
        debug_assert!(v.len() >= 2);
        Self(v)
    }

    /// Raises every entry to at least `floor` while keeping the sum at one.
    ///
    /// Entries below the floor are pinned to it and the remaining mass is
    /// rescaled. Points with every entry already `≥ floor` are returned
    /// unchanged.
    pub fn clamp_for_log(&self, floor: f64) -> Self {
        assert!(
            floor > 0.0 && floor <= 1e-3,
            "log floor must lie in (0, 1e-3], got {floor}"
        );
        if self.0.iter().all(|&v| v >= floor) {
            return self.clone();
        }
        let mut pinned: Vec<bool> = self.0.iter().map(|&v| v < floor).collect();
        let mut out = self.0.clone();
        // Rescaling can push a free entry under the floor; repeat until stable.
        loop {
            let n_pinned = pinned.iter().filter(|&&p| p).count();
            let free_mass: f64 = self.0.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(v, _)| v).sum();
            let target = 1.0 - n_pinned as f64 * floor;
            let scale = target / free_mass;
            let mut changed = false;
            for (i, o) in out.iter_mut().enumerate() {
                if pinned[i] {
                    *o = floor;
                } else {
                    *o = self.0[i] * scale;
                    if *o < floor {
                        pinned[i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Self(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> ClassLabel {
        ClassLabel(argmax_lowest(&self.0))
    }
}

impl std::ops::Index<usize> for ProbVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for ProbVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ProbVec::from_io(&raw).map_err(serde::de::Error::custom)
    }
}

/// Position of the maximum, ties broken toward the lowest index. NaN entries
/// never win.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// A class index, zero-based internally. External formats use one-based
/// labels; convert with [`ClassLabel::from_one_based`] and
/// [`ClassLabel::one_based`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub fn new(index: usize, classes: usize) -> Result<Self> {
        if index < classes {
            Ok(Self(index))
        } else {
            Err(Error::LabelOutOfRange { label: index, classes })
        }
    }

    pub fn from_one_based(label: usize, classes: usize) -> Result<Self> {
        if label == 0 || label > classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self(label - 1))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn one_based(self) -> usize {
        self.0 + 1
    }
}

/// Categorical prior `π_{1:M}` over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassPrior(ProbVec);

impl ClassPrior {
    pub fn new(pi: ProbVec) -> Self {
        Self(pi)
    }

    pub fn uniform(m: usize) -> Self {
        Self(ProbVec::uniform(m))
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, c: ClassLabel) -> f64 {
        self.0[c.index()]
    }

    pub fn as_probvec(&self) -> &ProbVec {
        &self.0
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.0.as_slice().iter().map(|p| p.ln()).collect()
    }
}

/// Gamma hyperprior constants: `κ ~ Ga(β, η)` and `γ ~ Ga(ν, ω)`, both in
/// shape-scale form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriorConstants {
    pub beta: f64,
    pub eta: f64,
    pub nu: f64,
    pub omega: f64,
}

impl HyperPriorConstants {
    pub fn new(beta: f64, eta: f64, nu: f64, omega: f64) -> Result<Self> {
        let hpc = Self { beta, eta, nu, omega };
        hpc.validate()?;
        Ok(hpc)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("eta", self.eta),
            ("nu", self.nu),
            ("omega", self.omega),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "hyperprior constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for HyperPriorConstants {
    /// `κ ~ Ga(2, 0.5)`, `γ ~ Ga(2, 5)`: prior mean of θ is 10, with enough
    /// mass near zero for very noisy classes.
    fn default() -> Self {
        Self {
            beta: 2.0,
            eta: 0.5,
            nu: 2.0,
            omega: 5.0,
        }
    }
}

/// Seed for every random draw in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> Rng {
        Rng::seed_from_u64(self.0)
    }

    /// Seed for the `offset`-th independent task (trial, replication, …).
    pub fn derive(self, offset: u64) -> Self {
        Self(self.0.wrapping_add(offset))
    }
}
