//! Synthetic data from the generative model: a class `c`, then an observation
//! `x ~ Dir(θ_c·1_c + 1)`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassLabel, ClassPrior, ProbVec, Rng, RngSeed};

/// Draws from `Dir(alpha)` by normalizing independent `Ga(α_k, 1)` draws.
pub fn sample_dirichlet(alpha: &[f64], rng: &mut Rng) -> Result<ProbVec> {
    if alpha.len() < 2 {
        return Err(Error::Config("Dirichlet needs at least 2 components".into()));
    }
    let draws = alpha
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map(|g| g.sample(rng))
                .map_err(|_| Error::Config(format!("Dirichlet concentration must be positive, got {a}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = draws.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::Data("Dirichlet draw underflowed".into()));
    }
    Ok(ProbVec::from_vec_unchecked(
        draws.into_iter().map(|g| g / sum).collect(),
    ))
}

/// One observation from class `c` with noise parameters `thetas`.
pub fn sample_observation(c: ClassLabel, thetas: &[f64], rng: &mut Rng) -> Result<ProbVec> {
    let mut alpha = vec![1.0; thetas.len()];
    alpha[c.index()] += thetas[c.index()];
    sample_dirichlet(&alpha, rng)
}

/// A contiguous run of frames from one class. `class` is one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub class: usize,
    pub frames: usize,
}

/// Which classes the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationPlan {
    /// `counts[m]` observations of class `m + 1`, in class order.
    Counts { counts: Vec<usize> },
    /// A stream of class segments, e.g. a scene change at a known frame.
    Segments { segments: Vec<Segment> },
    /// `n` observations with classes drawn from the prior.
    Draws { n: usize },
}

fn schema_version() -> u32 {
    1
}

/// Declarative description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "schema_version")]
    pub version: u32,
    #[serde(rename = "M")]
    pub classes: usize,
    pub true_thetas: Vec<f64>,
    /// Class prior; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    pub plan: ObservationPlan,
    #[serde(default)]
    pub seed: RngSeed,
}

impl ScenarioSpec {
    /// Three classes with `θ = (1, 6, 20)` and five observations of each.
    pub fn recovery(seed: RngSeed) -> Self {
        Self {
            version: 1,
            classes: 3,
            true_thetas: vec![1.0, 6.0, 20.0],
            pi: None,
            plan: ObservationPlan::Counts { counts: vec![5, 5, 5] },
            seed,
        }
    }

    pub fn prior(&self) -> Result<ClassPrior> {
        match &self.pi {
            Some(p) => Ok(ClassPrior::new(ProbVec::from_io(p)?)),
            None => Ok(ClassPrior::uniform(self.classes)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!("unsupported scenario version {}", self.version)));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.true_thetas.len() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                actual: self.true_thetas.len(),
            });
        }
        if self.true_thetas.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config(format!(
                "thetas must be non-negative, got {:?}",
                self.true_thetas
            )));
        }
        if self.prior()?.classes() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                actual: self.prior()?.classes(),
            });
        }
        match &self.plan {
            ObservationPlan::Counts { counts } if counts.len() != self.classes => Err(Error::DimensionMismatch {
                expected: self.classes,
                actual: counts.len(),
            }),
            ObservationPlan::Segments { segments } => {
                for s in segments {
                    ClassLabel::from_one_based(s.class, self.classes)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Class of every frame, in order.
    pub fn class_sequence(&self, rng: &mut Rng) -> Result<Vec<ClassLabel>> {
        let m = self.classes;
        Ok(match &self.plan {
            ObservationPlan::Counts { counts } => counts
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
                .map(|c| ClassLabel::new(c, m))
                .collect::<Result<_>>()?,
            ObservationPlan::Segments { segments } => {
                let mut out = Vec::new();
                for s in segments {
                    let c = ClassLabel::from_one_based(s.class, m)?;
                    out.extend(std::iter::repeat_n(c, s.frames));
                }
                out
            }
            ObservationPlan::Draws { n } => {
                let pi = self.prior()?;
                (0..*n).map(|_| draw_class(&pi, rng)).collect()
            }
        })
    }
}

/// Draws a class label from `pi` by inverse CDF.
pub fn draw_class(pi: &ClassPrior, rng: &mut Rng) -> ClassLabel {
    let u: f64 = rng.random();
    let p = pi.as_probvec().as_slice();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc && pk > 0.0 {
            return ClassLabel::new(k, p.len()).unwrap();
        }
    }
    // rounding left u above the last partial sum
    let last = p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1);
    ClassLabel::new(last, p.len()).unwrap()
}

/// Labeled observations for `spec`. Labels are for scoring only.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<(Vec<ProbVec>, Vec<ClassLabel>)> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let labels = spec.class_sequence(&mut rng)?;
    let obs = labels
        .iter()
        .map(|&c| sample_observation(c, &spec.true_thetas, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((obs, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_of(draws: &[ProbVec]) -> Vec<f64> {
        let m = draws[0].len();
        let n = draws.len() as f64;
        (0..m).map(|k| draws.iter().map(|d| d[k]).sum::<f64>() / n).collect()
    }

    /// Dirichlet marginal variance: α_k(α₀ − α_k) / (α₀²(α₀ + 1)).
    fn marginal_sd_of_mean(alpha: &[f64], k: usize, n: usize) -> f64 {
        let a0: f64 = alpha.iter().sum();
        let var = alpha[k] * (a0 - alpha[k]) / (a0 * a0 * (a0 + 1.0));
        (var / n as f64).sqrt()
    }

    #[test]
    fn flat_dirichlet_mean() {
        let mut rng = RngSeed(1).rng();
        let alpha = [1.0, 1.0, 1.0];
        let draws: Vec<_> = (0..100_000)
            .map(|_| sample_dirichlet(&alpha, &mut rng).unwrap())
            .collect();
        let mean = mean_of(&draws);
        for (k, m) in mean.iter().enumerate() {
            assert!((m - 1.0 / 3.0).abs() < 3.0 * marginal_sd_of_mean(&alpha, k, draws.len()));
        }
        assert!(draws.iter().all(|d| ProbVec::new(d.as_slice()).is_ok()));
    }

    #[test]
    fn concentrated_dirichlet_mean() {
        let mut rng = RngSeed(2).rng();
        let alpha = [21.0, 1.0, 1.0];
        let draws: Vec<_> = (0..100_000)
            .map(|_| sample_dirichlet(&alpha, &mut rng).unwrap())
            .collect();
        let mean = mean_of(&draws);
        let want = [21.0 / 23.0, 1.0 / 23.0, 1.0 / 23.0];
        for k in 0..3 {
            assert!((mean[k] - want[k]).abs() < 3.0 * marginal_sd_of_mean(&alpha, k, draws.len()));
        }
    }

    #[test]
    fn invalid_alpha() {
        let mut rng = RngSeed(0).rng();
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0], &mut rng).is_err());
    }

    #[test]
    fn recovery_scenario_shape() {
        let (obs, labels) = generate_scenario(&ScenarioSpec::recovery(RngSeed(3))).unwrap();
        assert_eq!(obs.len(), 15);
        for m in 0..3 {
            assert_eq!(labels.iter().filter(|c| c.index() == m).count(), 5);
        }
        let again = generate_scenario(&ScenarioSpec::recovery(RngSeed(3))).unwrap();
        assert_eq!(obs, again.0);
    }

    #[test]
    fn zero_thetas_give_flat_observations() {
        let spec = ScenarioSpec {
            true_thetas: vec![0.0; 3],
            plan: ObservationPlan::Counts {
                counts: vec![20_000, 0, 0],
            },
            ..ScenarioSpec::recovery(RngSeed(4))
        };
        let (obs, _) = generate_scenario(&spec).unwrap();
        let mean = mean_of(&obs);
        for (k, m) in mean.iter().enumerate() {
            assert!((m - 1.0 / 3.0).abs() < 3.0 * marginal_sd_of_mean(&[1.0; 3], k, obs.len()));
        }
    }

    #[test]
    fn per_class_means_and_spread() {
        let thetas = [1.0, 6.0, 20.0];
        let n = 10_000;
        let mut rng = RngSeed(5).rng();
        let mut spreads = Vec::new();
        for c in 0..3 {
            let label = ClassLabel::new(c, 3).unwrap();
            let draws: Vec<_> = (0..n)
                .map(|_| sample_observation(label, &thetas, &mut rng).unwrap())
                .collect();
            let mut alpha = vec![1.0; 3];
            alpha[c] += thetas[c];
            let a0: f64 = alpha.iter().sum();
            let mean = mean_of(&draws);
            for k in 0..3 {
                assert!((mean[k] - alpha[k] / a0).abs() < 3.0 * marginal_sd_of_mean(&alpha, k, n));
            }
            let spread: f64 = draws
                .iter()
                .map(|d| {
                    (0..3)
                        .map(|k| (d[k] - if k == c { 1.0 } else { 0.0 }).powi(2))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / n as f64;
            spreads.push(spread);
        }
        assert!(spreads[0] > spreads[1] && spreads[1] > spreads[2], "{spreads:?}");
    }

    #[test]
    fn segments_and_draws() {
        let spec = ScenarioSpec {
            plan: ObservationPlan::Segments {
                segments: vec![Segment { class: 1, frames: 3 }, Segment { class: 3, frames: 2 }],
            },
            ..ScenarioSpec::recovery(RngSeed(6))
        };
        let (_, labels) = generate_scenario(&spec).unwrap();
        let idx: Vec<usize> = labels.iter().map(|c| c.index()).collect();
        assert_eq!(idx, vec![0, 0, 0, 2, 2]);

        let spec = ScenarioSpec {
            pi: Some(vec![0.0, 1.0, 0.0]),
            plan: ObservationPlan::Draws { n: 50 },
            ..ScenarioSpec::recovery(RngSeed(7))
        };
        let (obs, labels) = generate_scenario(&spec).unwrap();
        assert_eq!(obs.len(), 50);
        assert!(labels.iter().all(|c| c.index() == 1));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ScenarioSpec::recovery(RngSeed(0));
        spec.true_thetas = vec![1.0, 2.0];
        assert!(generate_scenario(&spec).is_err());
        let mut spec = ScenarioSpec::recovery(RngSeed(0));
        spec.plan = ObservationPlan::Segments {
            segments: vec![Segment { class: 4, frames: 1 }],
        };
        assert!(generate_scenario(&spec).is_err());
        let mut spec = ScenarioSpec::recovery(RngSeed(0));
        spec.plan = ObservationPlan::Counts { counts: vec![0, 0, 0] };
        assert!(generate_scenario(&spec).unwrap().0.is_empty());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ScenarioSpec::recovery(RngSeed(42));
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"M\":3"));
        assert!(json.contains("\"kind\":\"counts\""));
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
