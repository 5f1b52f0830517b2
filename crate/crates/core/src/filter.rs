//! Recursive class filtering with a learned noise model.
//!
//! Starting from `ψ_m = π_m`, each observation multiplies `ψ_m` by the density
//! of `x` under class `m`'s noise model, `Dir(x; θ_m·1_m + 1)`. The state is
//! kept as `ln ψ` with the maximum subtracted after every step, so long
//! streams never underflow.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::densities::log_dirichlet_obs;
use crate::error::{Error, Result};
use crate::sampler::{median, NoiseModel};
use crate::types::{argmax_lowest, ClassLabel, ClassPrior, ProbVec, LOG_FLOOR};

/// Window size used for scene tracking.
pub const DEFAULT_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    FullHistory,
    /// Recompute from the prior over the last `W` observations.
    SlidingWindow(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    prior: ClassPrior,
    log_psi: Vec<f64>,
    n_seen: usize,
    mode: FilterMode,
    window: VecDeque<ProbVec>,
}

impl FilterState {
    /// Fresh full-history state with `ln ψ = ln π`.
    pub fn new(pi: &ClassPrior) -> Self {
        Self {
            prior: pi.clone(),
            log_psi: pi.log_probs(),
            n_seen: 0,
            mode: FilterMode::FullHistory,
            window: VecDeque::new(),
        }
    }

    pub fn with_mode(pi: &ClassPrior, mode: FilterMode) -> Result<Self> {
        if mode == FilterMode::SlidingWindow(0) {
            return Err(Error::Config("window size must be at least 1".into()));
        }
        Ok(Self { mode, ..Self::new(pi) })
    }

    pub fn classes(&self) -> usize {
        self.log_psi.len()
    }

    pub fn log_psi(&self) -> &[f64] {
        &self.log_psi
    }

    pub fn n_seen(&self) -> usize {
        self.n_seen
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    /// Folds one observation into the state under noise parameters `thetas`.
    pub fn update(&mut self, x: &ProbVec, thetas: &[f64]) -> Result<()> {
        let m = self.classes();
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: x.len(),
            });
        }
        if thetas.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: thetas.len(),
            });
        }
        let x = x.clamp_for_log(LOG_FLOOR);
        self.n_seen += 1;
        match self.mode {
            FilterMode::FullHistory => {
                accumulate(&mut self.log_psi, &x, thetas);
            }
            FilterMode::SlidingWindow(w) => {
                if self.window.len() == w {
                    self.window.pop_front();
                }
                self.window.push_back(x);
                self.log_psi = self.prior.log_probs();
                for obs in &self.window {
                    accumulate(&mut self.log_psi, obs, thetas);
                }
            }
        }
        Ok(())
    }

    pub fn step(mut self, x: &ProbVec, thetas: &[f64]) -> Result<Self> {
        self.update(x, thetas)?;
        Ok(self)
    }

    /// Normalized class posterior.
    pub fn posterior(&self) -> Result<ProbVec> {
        if self.n_seen == 0 {
            return Ok(self.prior.as_probvec().clone());
        }
        normalize_log(&self.log_psi)
    }
}

fn accumulate(log_psi: &mut [f64], x: &ProbVec, thetas: &[f64]) {
    for (m, lp) in log_psi.iter_mut().enumerate() {
        *lp += log_dirichlet_obs(x, ClassLabel::new(m, thetas.len()).unwrap(), thetas[m]);
    }
    let max = log_psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() {
        log_psi.iter_mut().for_each(|v| *v -= max);
    }
}

/// Softmax of log-weights. Fails when every weight is `−∞`.
pub fn normalize_log(log_w: &[f64]) -> Result<ProbVec> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateFilter);
    }
    let w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(ProbVec::from_vec_unchecked(w.into_iter().map(|v| v / sum).collect()))
}

/// Filters `obs` from the prior and returns the final posterior.
pub fn filter_sequence(obs: &[ProbVec], thetas: &[f64], pi: &ClassPrior) -> Result<ProbVec> {
    let mut state = FilterState::new(pi);
    for x in obs {
        state.update(x, thetas)?;
    }
    state.posterior()
}

/// Class posteriors induced by every retained `θ` sample: the distribution of
/// `ψ` under posterior noise uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorOfPosteriors {
    pub posteriors: Vec<ProbVec>,
}

impl PosteriorOfPosteriors {
    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }

    /// `ψ_m` values for one class, one per `θ` sample.
    pub fn class_values(&self, class: usize) -> Vec<f64> {
        self.posteriors.iter().map(|p| p[class]).collect()
    }

    pub fn class_median(&self, class: usize) -> f64 {
        median(&self.class_values(class))
    }

    /// Average posterior across `θ` samples.
    pub fn mean(&self) -> ProbVec {
        let m = self.posteriors[0].len();
        let n = self.posteriors.len() as f64;
        let mut acc = vec![0.0; m];
        for p in &self.posteriors {
            for (a, v) in acc.iter_mut().zip(p.as_slice()) {
                *a += v / n;
            }
        }
        let s: f64 = acc.iter().sum();
        ProbVec::from_vec_unchecked(acc.into_iter().map(|v| v / s).collect())
    }
}

/// Runs the full recursion once per retained `θ` sample. Samples are processed
/// in parallel; results keep sample order.
pub fn filter_distribution(obs: &[ProbVec], model: &NoiseModel, pi: &ClassPrior) -> Result<PosteriorOfPosteriors> {
    let posteriors = model
        .samples
        .par_iter()
        .map(|s| filter_sequence(obs, &s.thetas, pi))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorOfPosteriors { posteriors })
}

/// Posterior and label at every frame, computed over the last `min(t, W)`
/// observations with the model's median `θ`. Ties go to the lowest class.
pub fn sliding_window_classify(
    stream: &[ProbVec],
    window: usize,
    model: &NoiseModel,
    pi: &ClassPrior,
) -> Result<Vec<(ProbVec, ClassLabel)>> {
    let thetas = model.median_thetas();
    let mut state = FilterState::with_mode(pi, FilterMode::SlidingWindow(window))?;
    stream
        .iter()
        .map(|x| {
            state.update(x, &thetas)?;
            let post = state.posterior()?;
            let label = ClassLabel::new(argmax_lowest(post.as_slice()), post.len())?;
            Ok((post, label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::log_dirichlet_obs;
    use crate::types::RngSeed;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    const THETAS: [f64; 3] = [1.0, 6.0, 20.0];

    fn pv(v: &[f64]) -> ProbVec {
        ProbVec::new(v).unwrap()
    }

    /// ψ ∝ Γ(3+θ)/Γ(1+θ)·(1/3)^θ = (2, 56/729, 462·3^−20) for θ = (1, 6, 20).
    fn central_oracle() -> [f64; 3] {
        let w = [2.0, 56.0 / 729.0, 462.0 * 3f64.powi(-20)];
        let s: f64 = w.iter().sum();
        [w[0] / s, w[1] / s, w[2] / s]
    }

    #[test]
    fn init_matches_prior() {
        let u = ClassPrior::uniform(3);
        let st = FilterState::new(&u);
        for &v in st.log_psi() {
            assert_eq!(v, (1.0f64 / 3.0).ln());
        }
        assert_eq!(st.posterior().unwrap(), *u.as_probvec());
        assert_eq!(st.n_seen(), 0);

        let z = ClassPrior::new(pv(&[0.5, 0.5, 0.0]));
        let mut st = FilterState::new(&z);
        assert_eq!(st.log_psi()[2], f64::NEG_INFINITY);
        for _ in 0..5 {
            st.update(&pv(&[0.0, 0.0, 1.0]), &THETAS).unwrap();
        }
        assert_eq!(st.log_psi()[2], f64::NEG_INFINITY);
        assert_eq!(st.posterior().unwrap()[2], 0.0);
    }

    #[test]
    fn central_observation_favors_noisiest_class() {
        let st = FilterState::new(&ClassPrior::uniform(3))
            .step(&ProbVec::uniform(3), &THETAS)
            .unwrap();
        let post = st.posterior().unwrap();
        let want = central_oracle();
        for m in 0..3 {
            assert!((post[m] - want[m]).abs() < 1e-12, "{post:?} vs {want:?}");
        }
        assert!((post[0] - 0.963_011_827_595_816).abs() < 1e-12);
        assert!((post[1] - 0.036_988_108_604_503).abs() < 1e-12);
        assert!((post[2] - 6.379_968_090_680_74e-8).abs() < 1e-18);
    }

    #[test]
    fn equal_thetas_and_uniform_x_leave_psi_unchanged() {
        let pi = ClassPrior::new(pv(&[0.2, 0.5, 0.3]));
        let st = FilterState::new(&pi).step(&ProbVec::uniform(3), &[4.0; 3]).unwrap();
        let post = st.posterior().unwrap();
        for m in 0..3 {
            assert!((post[m] - pi.as_probvec()[m]).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_is_proportional_to_densities() {
        let x = pv(&[0.1, 0.7, 0.2]);
        let post = FilterState::new(&ClassPrior::uniform(3))
            .step(&x, &THETAS)
            .unwrap()
            .posterior()
            .unwrap();
        let d: Vec<f64> = (0..3)
            .map(|m| log_dirichlet_obs(&x, ClassLabel::new(m, 3).unwrap(), THETAS[m]).exp())
            .collect();
        let s: f64 = d.iter().sum();
        for m in 0..3 {
            assert!((post[m] - d[m] / s).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_when_all_classes_dead() {
        let st = FilterState {
            prior: ClassPrior::uniform(2),
            log_psi: vec![f64::NEG_INFINITY; 2],
            n_seen: 1,
            mode: FilterMode::FullHistory,
            window: VecDeque::new(),
        };
        assert!(matches!(st.posterior(), Err(Error::DegenerateFilter)));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut st = FilterState::new(&ClassPrior::uniform(3));
        assert!(st.update(&ProbVec::uniform(2), &THETAS).is_err());
        assert!(st.update(&ProbVec::uniform(3), &[1.0, 2.0]).is_err());
        assert!(FilterState::with_mode(&ClassPrior::uniform(3), FilterMode::SlidingWindow(0)).is_err());
    }

    #[test]
    fn long_identical_stream_stays_finite() {
        let mut st = FilterState::new(&ClassPrior::uniform(3));
        let x = pv(&[0.34, 0.33, 0.33]);
        for _ in 0..10_000 {
            st.update(&x, &THETAS).unwrap();
        }
        assert!(st.log_psi().iter().all(|v| v.is_finite()));
        let post = st.posterior().unwrap();
        assert!((post.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(post[0] > 0.999);
    }

    #[test]
    fn singleton_distribution_equals_point_filtering() {
        let pi = ClassPrior::uniform(3);
        let model = NoiseModel::point(THETAS.to_vec(), pi.clone()).unwrap();
        let obs = vec![pv(&[0.5, 0.3, 0.2]), pv(&[0.2, 0.5, 0.3])];
        let dist = filter_distribution(&obs, &model, &pi).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist.posteriors[0], filter_sequence(&obs, &THETAS, &pi).unwrap());
    }

    #[test]
    fn window_one_is_per_frame() {
        let pi = ClassPrior::uniform(3);
        let model = NoiseModel::point(THETAS.to_vec(), pi.clone()).unwrap();
        let stream = vec![pv(&[0.8, 0.1, 0.1]), pv(&[0.1, 0.1, 0.8]), ProbVec::uniform(3)];
        let out = sliding_window_classify(&stream, 1, &model, &pi).unwrap();
        for (x, (post, _)) in stream.iter().zip(&out) {
            let single = filter_sequence(std::slice::from_ref(x), &THETAS, &pi).unwrap();
            for m in 0..3 {
                assert!((post[m] - single[m]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn wide_window_equals_full_history() {
        let pi = ClassPrior::uniform(3);
        let model = NoiseModel::point(THETAS.to_vec(), pi.clone()).unwrap();
        let stream: Vec<ProbVec> = (0..9)
            .map(|i| {
                let a = 0.1 + 0.08 * i as f64;
                pv(&[a, (1.0 - a) * 0.4, (1.0 - a) * 0.6])
            })
            .collect();
        let out = sliding_window_classify(&stream, 50, &model, &pi).unwrap();
        let mut full = FilterState::new(&pi);
        for (x, (post, label)) in stream.iter().zip(&out) {
            full.update(x, &THETAS).unwrap();
            let want = full.posterior().unwrap();
            for m in 0..3 {
                assert!((post[m] - want[m]).abs() < 1e-12);
            }
            assert_eq!(*label, want.argmax());
        }
    }

    fn stream(max_len: usize) -> impl Strategy<Value = Vec<ProbVec>> {
        prop::collection::vec(
            prop::collection::vec(1e-4f64..1.0, 3).prop_map(|v| {
                let s: f64 = v.iter().sum();
                ProbVec::new(&v.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap()
            }),
            0..max_len,
        )
    }

    proptest! {
        #[test]
        fn recursion_equals_batch_and_is_order_invariant(obs in stream(50), seed in any::<u64>()) {
            let pi = ClassPrior::new(pv(&[0.2, 0.3, 0.5]));
            let rec = filter_sequence(&obs, &THETAS, &pi).unwrap();

            let batch: Vec<f64> = (0..3)
                .map(|m| {
                    pi.as_probvec()[m].ln()
                        + obs
                            .iter()
                            .map(|x| log_dirichlet_obs(x, ClassLabel::new(m, 3).unwrap(), THETAS[m]))
                            .sum::<f64>()
                })
                .collect();
            let batch = normalize_log(&batch).unwrap();

            let mut shuffled = obs.clone();
            shuffled.shuffle(&mut RngSeed(seed).rng());
            let perm = filter_sequence(&shuffled, &THETAS, &pi).unwrap();
            for m in 0..3 {
                let tol = 1e-10 * batch[m].abs().max(1e-300);
                prop_assert!((rec[m] - batch[m]).abs() <= tol.max(1e-300), "{:?} vs {:?}", rec, batch);
                prop_assert!((rec[m] - perm[m]).abs() <= tol.max(1e-300));
            }
        }
    }
}
