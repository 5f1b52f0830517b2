//! Python bindings. Probability vectors cross the boundary as lists of
//! floats and class labels are one-based, as in the file formats.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hbni::baselines;
use hbni::densities;
use hbni::experiment::{run_comparison, CompareConfig};
use hbni::filter::{self, FilterMode, FilterState};
use hbni::io::{model_from_json, model_to_json};
use hbni::sampler::{run_chain, ChainConfig, NoiseModel};
use hbni::synth::{generate_scenario, ScenarioSpec};
use hbni::{ClassLabel, ClassPrior, ProbVec, RngSeed};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn probvec(x: &[f64]) -> PyResult<ProbVec> {
    ProbVec::from_io(x).map_err(err)
}

fn stream(obs: &[Vec<f64>]) -> PyResult<Vec<ProbVec>> {
    obs.iter().map(|x| probvec(x)).collect()
}

fn prior(pi: Option<Vec<f64>>, classes: usize) -> PyResult<ClassPrior> {
    match pi {
        Some(p) => {
            let pi = ClassPrior::new(probvec(&p)?);
            if pi.classes() != classes {
                return Err(err(format!("prior has {} classes, expected {classes}", pi.classes())));
            }
            Ok(pi)
        }
        None => Ok(ClassPrior::uniform(classes)),
    }
}

/// Posterior samples of the per-class noise levels.
#[pyclass(name = "NoiseModel", frozen)]
struct PyNoiseModel {
    inner: NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    /// Single-sample model with known noise levels.
    #[staticmethod]
    #[pyo3(signature = (thetas, pi=None))]
    fn point(thetas: Vec<f64>, pi: Option<Vec<f64>>) -> PyResult<Self> {
        let pi = prior(pi, thetas.len())?;
        Ok(Self {
            inner: NoiseModel::point(thetas, pi).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, _) = model_from_json(text).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        model_to_json(&self.inner, None).map_err(err)
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi.as_probvec().as_slice().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    fn median_thetas(&self) -> Vec<f64> {
        self.inner.median_thetas()
    }

    /// Trace of `θ` for a one-based class.
    fn theta_trace(&self, class: usize) -> PyResult<Vec<f64>> {
        let c = ClassLabel::from_one_based(class, self.inner.classes).map_err(err)?;
        Ok(self.inner.theta_trace(c.index()))
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseModel(M={}, samples={})",
            self.inner.classes,
            self.inner.samples.len()
        )
    }
}

/// Recursive class filter; `window` keeps only the last W frames.
#[pyclass(name = "Filter")]
struct PyFilter {
    state: FilterState,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (pi, window=None))]
    fn new(pi: Vec<f64>, window: Option<usize>) -> PyResult<Self> {
        let pi = ClassPrior::new(probvec(&pi)?);
        let mode = window.map_or(FilterMode::FullHistory, FilterMode::SlidingWindow);
        Ok(Self {
            state: FilterState::with_mode(&pi, mode).map_err(err)?,
        })
    }

    fn update(&mut self, x: Vec<f64>, thetas: Vec<f64>) -> PyResult<()> {
        self.state.update(&probvec(&x)?, &thetas).map_err(err)
    }

    fn posterior(&self) -> PyResult<Vec<f64>> {
        Ok(self.state.posterior().map_err(err)?.into_vec())
    }

    fn label(&self) -> PyResult<usize> {
        Ok(self.state.posterior().map_err(err)?.argmax().one_based())
    }

    #[getter]
    fn n_seen(&self) -> usize {
        self.state.n_seen()
    }
}

#[pyfunction]
fn log_dirichlet_obs(x: Vec<f64>, class: usize, theta: f64) -> PyResult<f64> {
    let x = probvec(&x)?;
    let c = ClassLabel::from_one_based(class, x.len()).map_err(err)?;
    Ok(densities::log_dirichlet_obs(&x, c, theta))
}

/// Draws observations and one-based labels from a scenario given as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None))]
fn simulate(scenario: &str, seed: Option<u64>) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut spec: ScenarioSpec = serde_json::from_str(scenario).map_err(err)?;
    if let Some(s) = seed {
        spec.seed = RngSeed(s);
    }
    let (obs, labels) = generate_scenario(&spec).map_err(err)?;
    Ok((
        obs.into_iter().map(ProbVec::into_vec).collect(),
        labels.into_iter().map(ClassLabel::one_based).collect(),
    ))
}

/// Runs the chain. `config` is a chain-settings JSON object; returns the
/// model and the diagnostics as a JSON string.
#[pyfunction]
#[pyo3(signature = (obs, config=None, pi=None, seed=None))]
fn infer(
    py: Python<'_>,
    obs: Vec<Vec<f64>>,
    config: Option<&str>,
    pi: Option<Vec<f64>>,
    seed: Option<u64>,
) -> PyResult<(PyNoiseModel, String)> {
    let obs = stream(&obs)?;
    let classes = obs.first().map(ProbVec::len).ok_or_else(|| err("no observations"))?;
    let pi = prior(pi, classes)?;
    let mut cfg: ChainConfig = match config {
        Some(c) => serde_json::from_str(c).map_err(err)?,
        None => ChainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = RngSeed(s);
    }
    let (model, diag) = py.detach(|| run_chain(&obs, classes, &pi, &cfg)).map_err(err)?;
    let diag = serde_json::to_string(&diag).map_err(err)?;
    Ok((PyNoiseModel { inner: model }, diag))
}

/// Per-sample posteriors after the whole stream.
#[pyfunction]
fn filter_distribution(obs: Vec<Vec<f64>>, model: &PyNoiseModel) -> PyResult<Vec<Vec<f64>>> {
    let obs = stream(&obs)?;
    let pp = filter::filter_distribution(&obs, &model.inner, &model.inner.pi).map_err(err)?;
    Ok(pp.posteriors.into_iter().map(ProbVec::into_vec).collect())
}

#[pyfunction]
fn sliding_window_classify(
    obs: Vec<Vec<f64>>,
    window: usize,
    model: &PyNoiseModel,
) -> PyResult<Vec<(Vec<f64>, usize)>> {
    let obs = stream(&obs)?;
    let out = filter::sliding_window_classify(&obs, window, &model.inner, &model.inner.pi).map_err(err)?;
    Ok(out.into_iter().map(|(p, l)| (p.into_vec(), l.one_based())).collect())
}

#[pyfunction]
fn max_of_mean(obs: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, usize)> {
    let (mean, label) = baselines::max_of_mean(&stream(&obs)?).map_err(err)?;
    Ok((mean.into_vec(), label.one_based()))
}

#[pyfunction]
fn vote(obs: Vec<Vec<f64>>) -> PyResult<usize> {
    Ok(baselines::vote(&stream(&obs)?).map_err(err)?.one_based())
}

#[pyfunction]
#[pyo3(signature = (obs, pi=None))]
fn ssbf(obs: Vec<Vec<f64>>, pi: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let obs = stream(&obs)?;
    let classes = obs.first().map(ProbVec::len).ok_or_else(|| err("no observations"))?;
    let pi = prior(pi, classes)?;
    Ok(baselines::ssbf(&obs, &pi).map_err(err)?.into_vec())
}

/// Method comparison; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, trials=200, n_grid=None, seed=0))]
fn compare(py: Python<'_>, scenario: &str, trials: usize, n_grid: Option<Vec<usize>>, seed: u64) -> PyResult<String> {
    let scenario: ScenarioSpec = serde_json::from_str(scenario).map_err(err)?;
    let cfg = CompareConfig {
        chain: ChainConfig::default().with_seed(scenario.seed.derive(1)),
        scenario,
        trials,
        n_grid: n_grid.unwrap_or_else(|| (1..=15).collect()),
        seed: RngSeed(seed),
    };
    let (mut report, _, _) = py.detach(|| run_comparison(&cfg)).map_err(err)?;
    report.timings = None;
    serde_json::to_string(&report).map_err(err)
}

#[pymodule]
#[pyo3(name = "hbni")]
fn hbni_python(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseModel>()?;
    m.add_class::<PyFilter>()?;
    m.add_function(wrap_pyfunction!(log_dirichlet_obs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(filter_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(sliding_window_classify, m)?)?;
    m.add_function(wrap_pyfunction!(max_of_mean, m)?)?;
    m.add_function(wrap_pyfunction!(vote, m)?)?;
    m.add_function(wrap_pyfunction!(ssbf, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
