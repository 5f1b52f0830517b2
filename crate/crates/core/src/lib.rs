//! Hierarchical Bayesian noise inference (HBNI) for sequential probabilistic
//! classification.
//!
//! A classifier emits probability vectors on the simplex. Each true class `m`
//! produces outputs distributed `Dir(θ_m·1_m + 1)`, where a small `θ_m` means a
//! noisy classifier for that class. This crate:
//!
//! * infers the per-class noise parameters `θ_{1:M}` together with their shared
//!   Gamma hyperparameters `(κ, γ)` from *unlabeled* observations, using a
//!   component-wise Metropolis-Hastings chain ([`sampler`]);
//! * filters new observation streams into class posteriors with the recursive
//!   update `ψ_m ← Dir(x; θ_m·1_m + 1)·ψ_m` ([`filter`]);
//! * provides max-of-mean, voting and static-state Bayes filter consensus
//!   baselines ([`baselines`]);
//! * generates synthetic data from the same model ([`synth`]) and runs the
//!   method-comparison experiment ([`experiment`]).

pub mod baselines;
pub mod densities;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod io;
pub mod sampler;
pub mod special;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{ClassLabel, ClassPrior, HyperPriorConstants, ProbVec, RngSeed};
