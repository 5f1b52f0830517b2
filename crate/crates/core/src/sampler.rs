//! Metropolis-Hastings inference over class labels, per-class noise
//! parameters and their shared Gamma hyperparameters.
//!
//! Each iteration sweeps component-wise: every label `c_i`, then every `θ_m`,
//! then `κ`, then `γ`. Each move is scored only by the terms of the joint
//! density that it touches. Positive parameters move by Gaussian random walks
//! in log space; since the target lives in the original space, every such move
//! carries the Jacobian term `ln(new) − ln(old)`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densities::{dirichlet_obs_log_norm, log_gamma_density, log_joint, HyperParams};
use crate::error::{Error, Result};
use crate::types::{ClassLabel, ClassPrior, HyperPriorConstants, ProbVec, Rng, RngSeed, LOG_FLOOR};

/// All settings of one Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Probability that a label proposal keeps the current class.
    pub class_proposal_stickiness: f64,
    pub logstep_theta: f64,
    pub logstep_kappa: f64,
    pub logstep_gamma: f64,
    pub init_theta: f64,
    pub init_kappa: f64,
    pub init_gamma: f64,
    /// Per-class starting values; overrides `init_theta` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_thetas: Option<Vec<f64>>,
    pub hyperprior: HyperPriorConstants,
    pub seed: RngSeed,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 8000,
            burn_in: 6000,
            thinning: 10,
            class_proposal_stickiness: 0.8,
            logstep_theta: 0.8,
            logstep_kappa: 0.8,
            logstep_gamma: 0.8,
            init_theta: 5.0,
            init_kappa: 2.0,
            init_gamma: 2.0,
            init_thetas: None,
            hyperprior: HyperPriorConstants::default(),
            seed: RngSeed(0),
        }
    }
}

impl ChainConfig {
    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = seed;
        self
    }

    /// Number of states kept after burn-in and thinning.
    pub fn retained(&self) -> usize {
        self.total_iterations.saturating_sub(self.burn_in) / self.thinning.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than total_iterations ({})",
                self.burn_in, self.total_iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.retained() == 0 {
            return Err(Error::Config(
                "no samples retained: total_iterations - burn_in is below thinning".into(),
            ));
        }
        let s = self.class_proposal_stickiness;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Config(format!(
                "class_proposal_stickiness must lie in (0, 1), got {s}"
            )));
        }
        for (name, v) in [
            ("logstep_theta", self.logstep_theta),
            ("logstep_kappa", self.logstep_kappa),
            ("logstep_gamma", self.logstep_gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("init_theta", self.init_theta),
            ("init_kappa", self.init_kappa),
            ("init_gamma", self.init_gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = &self.init_thetas {
            if t.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Config(format!("init_thetas must be positive, got {t:?}")));
            }
        }
        self.hyperprior.validate()
    }
}

/// One retained state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub thetas: Vec<f64>,
    pub kappa: f64,
    pub gamma: f64,
}

/// Posterior samples of the noise parameters, the product of inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub classes: usize,
    pub pi: ClassPrior,
    pub samples: Vec<NoiseSample>,
    pub config: ChainConfig,
}

impl NoiseModel {
    /// A model holding exactly one sample, for filtering with known `θ`.
    pub fn point(thetas: Vec<f64>, pi: ClassPrior) -> Result<Self> {
        Self::new(
            pi,
            vec![NoiseSample {
                thetas,
                kappa: 1.0,
                gamma: 1.0,
            }],
            ChainConfig::default(),
        )
    }

    pub fn new(pi: ClassPrior, samples: Vec<NoiseSample>, config: ChainConfig) -> Result<Self> {
        let classes = pi.classes();
        if samples.is_empty() {
            return Err(Error::Data("noise model has no samples".into()));
        }
        for s in &samples {
            if s.thetas.len() != classes {
                return Err(Error::DimensionMismatch {
                    expected: classes,
                    actual: s.thetas.len(),
                });
            }
            if s.thetas.iter().any(|t| !(t.is_finite() && *t >= 0.0))
                || !(s.kappa.is_finite() && s.kappa > 0.0)
                || !(s.gamma.is_finite() && s.gamma > 0.0)
            {
                return Err(Error::Data(format!("invalid noise sample {s:?}")));
            }
        }
        Ok(Self {
            classes,
            pi,
            samples,
            config,
        })
    }

    /// Per-class marginal posterior median of `θ`.
    pub fn median_thetas(&self) -> Vec<f64> {
        predictive_theta_median(self)
    }

    pub fn theta_trace(&self, class: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.thetas[class]).collect()
    }
}

/// Mean, median and central 90% interval of one parameter's trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

impl TraceSummary {
    pub fn from_trace(name: impl Into<String>, trace: &[f64]) -> Self {
        let mut sorted = trace.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            name: name.into(),
            mean: trace.iter().sum::<f64>() / trace.len() as f64,
            median: quantile_sorted(&sorted, 0.5),
            q05: quantile_sorted(&sorted, 0.05),
            q95: quantile_sorted(&sorted, 0.95),
        }
    }
}

/// Acceptance fraction per variable block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub class: f64,
    pub theta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance: AcceptanceRates,
    pub summaries: Vec<TraceSummary>,
    /// For each observation, the fraction of retained states assigning it to
    /// each class.
    pub label_frequencies: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of a sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// Keeps `current` with probability `stickiness`, otherwise picks one of the
/// other `classes − 1` labels uniformly. The kernel is symmetric.
pub fn propose_class(current: ClassLabel, classes: usize, stickiness: f64, rng: &mut Rng) -> ClassLabel {
    debug_assert!(classes >= 2);
    if rng.random::<f64>() < stickiness {
        return current;
    }
    let mut k = rng.random_range(0..classes - 1);
    if k >= current.index() {
        k += 1;
    }
    ClassLabel::new(k, classes).expect("proposal index in range")
}

/// `exp(ln(current) + step·ε)` with `ε ~ N(0, 1)`.
pub fn propose_logscale(current: f64, step: f64, rng: &mut Rng) -> f64 {
    if step == 0.0 {
        return current;
    }
    let eps: f64 = StandardNormal.sample(rng);
    (current.ln() + step * eps).exp()
}

/// Metropolis-Hastings accept/reject with an additive log correction term.
pub fn mh_accept(log_target_new: f64, log_target_old: f64, log_correction: f64, rng: &mut Rng) -> bool {
    let log_ratio = log_target_new - log_target_old + log_correction;
    if log_ratio.is_nan() || log_target_new == f64::NEG_INFINITY {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>() < log_ratio.exp()
}

/// Mutable chain state plus the caches the local scores need.
struct ChainState {
    labels: Vec<usize>,
    thetas: Vec<f64>,
    kappa: f64,
    gamma: f64,
    /// `lnΓ(M + θ_m) − lnΓ(1 + θ_m)` for the current `θ_m`.
    norms: Vec<f64>,
}

#[derive(Default)]
struct Counter {
    accepted: u64,
    proposed: u64,
}

impl Counter {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Runs one chain over unlabeled observations and returns the retained
/// samples together with acceptance rates and trace summaries.
pub fn run_chain(
    obs: &[ProbVec],
    classes: usize,
    pi: &ClassPrior,
    cfg: &ChainConfig,
) -> Result<(NoiseModel, ChainDiagnostics)> {
    cfg.validate()?;
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
    }
    if pi.classes() != classes {
        return Err(Error::DimensionMismatch {
            expected: classes,
            actual: pi.classes(),
        });
    }
    if obs.is_empty() {
        return Err(Error::Data("no observations to infer from".into()));
    }
    if let Some(x) = obs.iter().find(|x| x.len() != classes) {
        return Err(Error::DimensionMismatch {
            expected: classes,
            actual: x.len(),
        });
    }

    let clamped: Vec<ProbVec> = obs.iter().map(|x| x.clamp_for_log(LOG_FLOOR)).collect();
    let log_x: Vec<Vec<f64>> = clamped
        .iter()
        .map(|x| x.as_slice().iter().map(|v| v.ln()).collect())
        .collect();
    let log_pi = pi.log_probs();
    let hpc = cfg.hyperprior;
    let mut rng = cfg.seed.rng();

    let reachable: Vec<usize> = (0..classes).filter(|&m| log_pi[m].is_finite()).collect();
    let labels: Vec<usize> = (0..obs.len())
        .map(|_| reachable[rng.random_range(0..reachable.len())])
        .collect();
    let thetas = match &cfg.init_thetas {
        Some(t) if t.len() != classes => {
            return Err(Error::DimensionMismatch {
                expected: classes,
                actual: t.len(),
            })
        }
        Some(t) => t.clone(),
        None => vec![cfg.init_theta; classes],
    };
    let mut st = ChainState {
        norms: thetas.iter().map(|&t| dirichlet_obs_log_norm(classes, t)).collect(),
        labels,
        thetas,
        kappa: cfg.init_kappa,
        gamma: cfg.init_gamma,
    };

    let init_labels: Vec<ClassLabel> = st
        .labels
        .iter()
        .map(|&c| ClassLabel::new(c, classes))
        .collect::<Result<_>>()?;
    let init = log_joint(
        &clamped,
        &init_labels,
        &st.thetas,
        HyperParams::new(st.kappa, st.gamma)?,
        pi,
        &hpc,
    )?;
    if !init.is_finite() {
        return Err(Error::Config(format!(
            "log target is not finite at the initial state ({init})"
        )));
    }

    let mut acc_class = Counter::default();
    let mut acc_theta = Counter::default();
    let mut acc_kappa = Counter::default();
    let mut acc_gamma = Counter::default();
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut count = vec![0usize; classes];
    let mut sum_log_x = vec![0.0f64; classes];
    let mut label_counts = vec![vec![0u64; classes]; obs.len()];

    for iter in 0..cfg.total_iterations {
        // labels
        for (i, lx) in log_x.iter().enumerate() {
            let cur = st.labels[i];
            let prop = propose_class(
                ClassLabel::new(cur, classes)?,
                classes,
                cfg.class_proposal_stickiness,
                &mut rng,
            )
            .index();
            if prop == cur {
                acc_class.record(true);
                continue;
            }
            let old = log_pi[cur] + st.norms[cur] + st.thetas[cur] * lx[cur];
            let new = log_pi[prop] + st.norms[prop] + st.thetas[prop] * lx[prop];
            let accepted = mh_accept(new, old, 0.0, &mut rng);
            if accepted {
                st.labels[i] = prop;
            }
            acc_class.record(accepted);
        }

        // sufficient statistics of the data terms for each θ_m
        count.iter_mut().for_each(|c| *c = 0);
        sum_log_x.iter_mut().for_each(|s| *s = 0.0);
        for (lx, &c) in log_x.iter().zip(&st.labels) {
            count[c] += 1;
            sum_log_x[c] += lx[c];
        }

        // noise parameters
        for m in 0..classes {
            let cur = st.thetas[m];
            let prop = propose_logscale(cur, cfg.logstep_theta, &mut rng);
            let prop_norm = dirichlet_obs_log_norm(classes, prop);
            let old = count[m] as f64 * st.norms[m] + cur * sum_log_x[m] + log_gamma_density(cur, st.kappa, st.gamma);
            let new = count[m] as f64 * prop_norm + prop * sum_log_x[m] + log_gamma_density(prop, st.kappa, st.gamma);
            let accepted = mh_accept(new, old, prop.ln() - cur.ln(), &mut rng);
            if accepted {
                st.thetas[m] = prop;
                st.norms[m] = prop_norm;
            }
            acc_theta.record(accepted);
        }

        // shape κ
        {
            let cur = st.kappa;
            let prop = propose_logscale(cur, cfg.logstep_kappa, &mut rng);
            let score = |k: f64| {
                st.thetas
                    .iter()
                    .map(|&t| log_gamma_density(t, k, st.gamma))
                    .sum::<f64>()
                    + log_gamma_density(k, hpc.beta, hpc.eta)
            };
            let accepted = mh_accept(score(prop), score(cur), prop.ln() - cur.ln(), &mut rng);
            if accepted {
                st.kappa = prop;
            }
            acc_kappa.record(accepted);
        }

        // scale γ
        {
            let cur = st.gamma;
            let prop = propose_logscale(cur, cfg.logstep_gamma, &mut rng);
            let score = |g: f64| {
                st.thetas
                    .iter()
                    .map(|&t| log_gamma_density(t, st.kappa, g))
                    .sum::<f64>()
                    + log_gamma_density(g, hpc.nu, hpc.omega)
            };
            let accepted = mh_accept(score(prop), score(cur), prop.ln() - cur.ln(), &mut rng);
            if accepted {
                st.gamma = prop;
            }
            acc_gamma.record(accepted);
        }

        if iter >= cfg.burn_in && (iter + 1 - cfg.burn_in).is_multiple_of(cfg.thinning) {
            for (counts, &c) in label_counts.iter_mut().zip(&st.labels) {
                counts[c] += 1;
            }
            samples.push(NoiseSample {
                thetas: st.thetas.clone(),
                kappa: st.kappa,
                gamma: st.gamma,
            });
        }
    }

    let model = NoiseModel::new(pi.clone(), samples, cfg.clone())?;
    let mut summaries: Vec<TraceSummary> = (0..classes)
        .map(|m| TraceSummary::from_trace(format!("theta_{}", m + 1), &model.theta_trace(m)))
        .collect();
    let kappas: Vec<f64> = model.samples.iter().map(|s| s.kappa).collect();
    let gammas: Vec<f64> = model.samples.iter().map(|s| s.gamma).collect();
    summaries.push(TraceSummary::from_trace("kappa", &kappas));
    summaries.push(TraceSummary::from_trace("gamma", &gammas));
    let diagnostics = ChainDiagnostics {
        acceptance: AcceptanceRates {
            class: acc_class.rate(),
            theta: acc_theta.rate(),
            kappa: acc_kappa.rate(),
            gamma: acc_gamma.rate(),
        },
        summaries,
        label_frequencies: label_counts
            .iter()
            .map(|row| row.iter().map(|&n| n as f64 / model.samples.len() as f64).collect())
            .collect(),
    };
    Ok((model, diagnostics))
}

/// Per-class marginal posterior median of `θ` across the retained samples.
pub fn predictive_theta_median(model: &NoiseModel) -> Vec<f64> {
    (0..model.classes).map(|m| median(&model.theta_trace(m))).collect()
}

/// Median of `θ ~ Ga(κ, γ)` with `(κ, γ)` drawn from the retained samples:
/// the posterior-predictive median for the noise level of a new class.
pub fn posterior_predictive_theta_median(model: &NoiseModel, draws_per_sample: usize, rng: &mut Rng) -> f64 {
    let mut draws = Vec::with_capacity(model.samples.len() * draws_per_sample);
    for s in &model.samples {
        let g = Gamma::new(s.kappa, s.gamma).expect("positive hyperparameters");
        draws.extend((0..draws_per_sample).map(|_| g.sample(rng)));
    }
    median(&draws)
}

/// Median of `θ` under the hyperprior alone: `κ ~ Ga(β, η)`, `γ ~ Ga(ν, ω)`,
/// `θ ~ Ga(κ, γ)`.
pub fn prior_predictive_theta_median(hpc: &HyperPriorConstants, draws: usize, rng: &mut Rng) -> f64 {
    let kd = Gamma::new(hpc.beta, hpc.eta).expect("positive constants");
    let gd = Gamma::new(hpc.nu, hpc.omega).expect("positive constants");
    let thetas: Vec<f64> = (0..draws)
        .map(|_| {
            let k: f64 = kd.sample(rng);
            let g: f64 = gd.sample(rng);
            Gamma::new(k, g).map(|d| d.sample(rng)).unwrap_or(0.0)
        })
        .collect();
    median(&thetas)
}
