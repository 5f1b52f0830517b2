//! Noise-agnostic consensus baselines: max-of-mean, voting, and the static
//! state Bayes filter (SSBF).
//!
//! All methods break argmax ties toward the lowest class index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::normalize_log;
use crate::types::{argmax_lowest, ClassLabel, ClassPrior, ProbVec, LOG_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "mom")]
    MaxOfMean,
    Vote,
    Ssbf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MaxOfMean, Method::Vote, Method::Ssbf];

    pub fn tag(self) -> &'static str {
        match self {
            Method::MaxOfMean => "mom",
            Method::Vote => "vote",
            Method::Ssbf => "ssbf",
        }
    }
}

/// Elementwise mean of the observations and its argmax.
pub fn max_of_mean(obs: &[ProbVec]) -> Result<(ProbVec, ClassLabel)> {
    let mut state = BaselineState::new(Method::MaxOfMean, &uniform_for(obs)?);
    for x in obs {
        state.update(x)?;
    }
    Ok((state.posterior()?, state.label()))
}

/// Class with the most per-frame argmax votes.
pub fn vote(obs: &[ProbVec]) -> Result<ClassLabel> {
    let mut state = BaselineState::new(Method::Vote, &uniform_for(obs)?);
    for x in obs {
        state.update(x)?;
    }
    Ok(state.label())
}

fn uniform_for(obs: &[ProbVec]) -> Result<ClassPrior> {
    let first = obs
        .first()
        .ok_or_else(|| Error::Data("consensus needs at least one observation".into()))?;
    Ok(ClassPrior::uniform(first.len()))
}

#[derive(Debug, Clone, PartialEq)]
enum Accumulator {
    Sum(Vec<f64>),
    Votes(Vec<u64>),
    LogPosterior(Vec<f64>),
}

/// Running state of one baseline method over a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    method: Method,
    acc: Accumulator,
    n_seen: usize,
    pi: ClassPrior,
}

impl BaselineState {
    /// `pi` only affects SSBF; the other methods use it for the class count.
    pub fn new(method: Method, pi: &ClassPrior) -> Self {
        let m = pi.classes();
        let acc = match method {
            Method::MaxOfMean => Accumulator::Sum(vec![0.0; m]),
            Method::Vote => Accumulator::Votes(vec![0; m]),
            Method::Ssbf => Accumulator::LogPosterior(pi.log_probs()),
        };
        Self {
            method,
            acc,
            n_seen: 0,
            pi: pi.clone(),
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn n_seen(&self) -> usize {
        self.n_seen
    }

    pub fn update(&mut self, x: &ProbVec) -> Result<()> {
        let m = self.pi.classes();
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: x.len(),
            });
        }
        match &mut self.acc {
            Accumulator::Sum(sum) => {
                for (s, v) in sum.iter_mut().zip(x.as_slice()) {
                    *s += v;
                }
            }
            Accumulator::Votes(votes) => votes[x.argmax().index()] += 1,
            Accumulator::LogPosterior(lp) => {
                let x = x.clamp_for_log(LOG_FLOOR);
                for (k, l) in lp.iter_mut().enumerate() {
                    let prior = self.pi.as_probvec()[k];
                    if prior == 0.0 {
                        if x[k] > 0.0 {
                            return Err(Error::InconsistentPrior { class: k + 1 });
                        }
                        continue;
                    }
                    *l += x[k].ln() - prior.ln();
                }
                let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max.is_finite() {
                    lp.iter_mut().for_each(|v| *v -= max);
                }
            }
        }
        self.n_seen += 1;
        Ok(())
    }

    /// SSBF update, `P(c|x_{1:N}) ∝ x_{N,c} / π_c · P(c|x_{1:N−1})`.
    pub fn ssbf_step(mut self, x: &ProbVec) -> Result<Self> {
        if self.method != Method::Ssbf {
            return Err(Error::Config(format!(
                "ssbf_step called on a {} state",
                self.method.tag()
            )));
        }
        self.update(x)?;
        Ok(self)
    }

    /// Current consensus distribution: the running mean, the vote shares, or
    /// the SSBF posterior. Before any observation this is the prior.
    pub fn posterior(&self) -> Result<ProbVec> {
        if self.n_seen == 0 {
            return Ok(self.pi.as_probvec().clone());
        }
        let n = self.n_seen as f64;
        match &self.acc {
            Accumulator::Sum(sum) => ProbVec::new(&sum.iter().map(|s| s / n).collect::<Vec<_>>()),
            Accumulator::Votes(votes) => ProbVec::new(&votes.iter().map(|&v| v as f64 / n).collect::<Vec<_>>()),
            Accumulator::LogPosterior(lp) => normalize_log(lp),
        }
    }

    pub fn label(&self) -> ClassLabel {
        let m = self.pi.classes();
        let idx = match &self.acc {
            Accumulator::Sum(v) | Accumulator::LogPosterior(v) => argmax_lowest(v),
            Accumulator::Votes(v) => {
                let f: Vec<f64> = v.iter().map(|&c| c as f64).collect();
                argmax_lowest(&f)
            }
        };
        ClassLabel::new(idx, m).expect("argmax in range")
    }
}

/// Runs SSBF over `obs` from prior `pi`.
pub fn ssbf(obs: &[ProbVec], pi: &ClassPrior) -> Result<ProbVec> {
    let mut state = BaselineState::new(Method::Ssbf, pi);
    for x in obs {
        state.update(x)?;
    }
    state.posterior()
}
