//! Python bindings: courses, environments, reward evaluation, GAE, and the
//! train/evaluate entry points.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use navgait::env::biped::{BipedConfig, BipedEnv};
use navgait::env::pointmass::{PointMassConfig, PointMassEnv};
use navgait::env::stepper::{StepperConfig, StepperEnv};
use navgait::env::{Environment, EnvironmentLayout, StepResult};
use navgait::harness::{self, Checkpoint, ExperimentConfig};
use navgait::nnet::{init_params, Activation, MlpSpec, ParameterSet};
use navgait::ppo::{compute_gae, RolloutBuffer, Transition};
use navgait::rewards::{self, DistanceTarget, TargetKind};
use navgait::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence(_) | Error::NonFinite(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Obstacle course: start, destination, obstacles and shaping constants.
#[pyclass(name = "Layout", from_py_object)]
#[derive(Clone)]
struct PyLayout {
    inner: EnvironmentLayout,
}

#[pymethods]
impl PyLayout {
    /// The shipped four-obstacle course.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: EnvironmentLayout::default(),
        }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        EnvironmentLayout::parse(text).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        EnvironmentLayout::load(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn initial(&self) -> (f64, f64) {
        (self.inner.initial[0], self.inner.initial[1])
    }

    #[getter]
    fn destination(&self) -> (f64, f64) {
        (self.inner.destination[0], self.inner.destination[1])
    }

    #[getter]
    fn goal_radius(&self) -> f64 {
        self.inner.goal_radius
    }

    /// `(x, y, radius)` per obstacle.
    #[getter]
    fn obstacles(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .obstacles
            .iter()
            .map(|o| (o.center[0], o.center[1], o.radius))
            .collect()
    }

    /// Total distance reward at a base position, using the layout's start as
    /// the initial-position target.
    fn distance_reward(&self, x: f64, y: f64) -> f64 {
        rewards::distance_reward([x, y], &self.inner.targets(self.inner.initial)).total
    }

    fn __repr__(&self) -> String {
        format!(
            "Layout(obstacles={}, destination={:?})",
            self.inner.obstacles.len(),
            self.inner.destination
        )
    }
}

/// One environment instance: "pointmass", "stepper" or "biped".
#[pyclass(name = "Env", unsendable)]
struct PyEnv {
    inner: Box<dyn Environment>,
}

fn step_tuple<'py>(py: Python<'py>, r: StepResult) -> PyResult<(Vec<f64>, f64, bool, bool, Bound<'py, PyDict>)> {
    let info = PyDict::new(py);
    for (name, v) in &r.info.terms {
        info.set_item(*name, *v)?;
    }
    info.set_item("reason", r.info.reason.map(|x| x.code()))?;
    info.set_item("collision", r.info.collision)?;
    info.set_item("distance_to_goal", r.info.distance_to_goal)?;
    info.set_item("displacement", r.info.displacement)?;
    info.set_item("step_length", r.info.step_length)?;
    Ok((r.obs, r.reward, r.terminated, r.truncated, info))
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (kind, layout=None))]
    fn new(kind: &str, layout: Option<PyLayout>) -> PyResult<Self> {
        let layout = layout.map(|l| l.inner).unwrap_or_default();
        let inner: Box<dyn Environment> = match kind {
            "pointmass" => Box::new(PointMassEnv::new(layout, PointMassConfig::default()).map_err(py_err)?),
            "stepper" => Box::new(StepperEnv::new(layout, StepperConfig::default()).map_err(py_err)?),
            "biped" => Box::new(BipedEnv::new(BipedConfig::default()).map_err(py_err)?),
            other => return Err(PyValueError::new_err(format!("unknown environment '{}'", other))),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.observation_layout().dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    #[getter]
    fn reward_terms(&self) -> Vec<&'static str> {
        self.inner.reward_terms().to_vec()
    }

    #[pyo3(signature = (seed=0))]
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(&mut ChaCha8Rng::seed_from_u64(seed)).obs
    }

    /// Returns `(obs, reward, terminated, truncated, info)`.
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        action: Vec<f64>,
    ) -> PyResult<(Vec<f64>, f64, bool, bool, Bound<'py, PyDict>)> {
        let r = self.inner.step(&action).map_err(py_err)?;
        step_tuple(py, r)
    }

    /// Current state as a row of the trajectory dump.
    fn trace(&self) -> Vec<f64> {
        self.inner.trace()
    }

    #[getter]
    fn trace_header(&self) -> Vec<&'static str> {
        self.inner.trace_header().to_vec()
    }
}

/// Multilayer perceptron with ReLU hidden layers. The output activation is
/// "identity", "tanh" or "relu".
#[pyclass(name = "Mlp", from_py_object)]
#[derive(Clone)]
struct PyMlp {
    inner: ParameterSet,
}

#[pymethods]
impl PyMlp {
    #[new]
    #[pyo3(signature = (sizes, seed=0, output="identity"))]
    fn new(sizes: Vec<usize>, seed: u64, output: &str) -> PyResult<Self> {
        let out = Activation::from_name(output)
            .ok_or_else(|| PyValueError::new_err(format!("unknown activation '{}'", output)))?;
        let spec = MlpSpec::new(sizes, Activation::Relu, out).map_err(py_err)?;
        Ok(Self {
            inner: init_params(&spec, seed),
        })
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.len()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    fn set_params(&mut self, values: Vec<f64>) -> PyResult<()> {
        self.inner = ParameterSet::from_flat(self.inner.spec().clone(), values).map_err(py_err)?;
        Ok(())
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&x).map_err(py_err)
    }

    /// Gradient of `dot(output_grad, forward(x))` with respect to the
    /// parameters and the input.
    fn backward(&self, x: Vec<f64>, output_grad: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (_, cache) = self.inner.forward(&x).map_err(py_err)?;
        let (g, gx) = self.inner.backward(&cache, &output_grad).map_err(py_err)?;
        Ok((g.as_slice().to_vec(), gx))
    }
}

/// Trained policy loaded from a checkpoint file.
#[pyclass(name = "Checkpoint", frozen)]
struct PyCheckpoint {
    inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Checkpoint::load(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.inner.updates
    }

    #[getter]
    fn env_steps(&self) -> u64 {
        self.inner.env_steps
    }

    #[getter]
    fn env(&self) -> &'static str {
        self.inner.config.env.name()
    }

    /// Deterministic action: the policy mean.
    fn act(&self, obs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.policy.mean(&obs).map_err(py_err)
    }

    fn value(&self, obs: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.critic.predict(&obs).map_err(py_err)?[0])
    }

    /// Evaluation summary as a dict.
    #[pyo3(signature = (episodes=100, layout=None, deterministic=true))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        episodes: usize,
        layout: Option<PyLayout>,
        deterministic: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let layout = match layout {
            Some(l) => l.inner,
            None => self.inner.config.course().map_err(py_err)?,
        };
        let r = harness::evaluate_checkpoint(&self.inner, &layout, episodes, deterministic, None)
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("episodes", r.episodes)?;
        d.set_item("success_rate", r.success_rate)?;
        d.set_item("collision_rate", r.collision_rate)?;
        d.set_item("fall_rate", r.fall_rate)?;
        d.set_item("timeout_rate", r.timeout_rate)?;
        d.set_item("mean_return", r.mean_return)?;
        d.set_item("mean_length", r.mean_length)?;
        d.set_item("mean_final_distance", r.mean_final_distance)?;
        d.set_item("mean_displacement", r.mean_displacement)?;
        d.set_item("mean_step_length", r.mean_step_length)?;
        Ok(d)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// `sum(w * exp(-k * |base - p|))` over `(x, y, k, weight, kind)` targets,
/// kind being "destination", "obstacle" or "initial".
#[pyfunction]
fn distance_reward(base: (f64, f64), targets: Vec<(f64, f64, f64, f64, String)>) -> PyResult<f64> {
    let ts = targets
        .into_iter()
        .map(|(x, y, k, weight, kind)| {
            let kind = match kind.as_str() {
                "destination" => TargetKind::Destination,
                "obstacle" => TargetKind::Obstacle,
                "initial" => TargetKind::InitialPosition,
                other => return Err(PyValueError::new_err(format!("unknown target kind '{}'", other))),
            };
            let t = DistanceTarget {
                position: [x, y],
                k,
                weight,
                kind,
            };
            t.validate().map_err(py_err)?;
            Ok(t)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(rewards::distance_reward([base.0, base.1], &ts).total)
}

/// Advantages and returns for one trajectory segment. Terminated steps
/// bootstrap zero; truncated steps bootstrap `truncation_values[t]`.
#[pyfunction]
#[pyo3(signature = (rewards, values, terminated, truncated, bootstrap_value, gamma=0.99, lam=0.95, truncation_values=None))]
#[allow(clippy::too_many_arguments)]
fn gae(
    rewards: Vec<f64>,
    values: Vec<f64>,
    terminated: Vec<bool>,
    truncated: Vec<bool>,
    bootstrap_value: f64,
    gamma: f64,
    lam: f64,
    truncation_values: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || terminated.len() != n || truncated.len() != n {
        return Err(PyValueError::new_err("all sequences must have the same length"));
    }
    let tv = truncation_values.unwrap_or_else(|| vec![0.0; n]);
    if tv.len() != n {
        return Err(PyValueError::new_err("truncation_values has the wrong length"));
    }
    let ts = (0..n)
        .map(|i| Transition {
            obs: Vec::new(),
            action: Vec::new(),
            log_prob: 0.0,
            reward: rewards[i],
            value: values[i],
            terminated: terminated[i],
            truncated: truncated[i],
            truncation_value: tv[i],
        })
        .collect();
    let buf = RolloutBuffer::from_transitions(ts, bootstrap_value);
    compute_gae(&buf, gamma, lam).map_err(py_err)
}

/// Trains from a config file and returns the final checkpoint path.
#[pyfunction]
#[pyo3(signature = (config_path, resume=None))]
fn train(py: Python<'_>, config_path: PathBuf, resume: Option<PathBuf>) -> PyResult<PathBuf> {
    let config = ExperimentConfig::load(&config_path).map_err(py_err)?;
    let resume = resume.map(|p| Checkpoint::load(&p)).transpose().map_err(py_err)?;
    py.detach(|| harness::train(&config, resume)).map_err(py_err)?;
    Ok(config.output_dir.join(harness::train::CHECKPOINT_FILE))
}

#[pymodule(name = "navgait")]
mod navgait_module {
    #[pymodule_export]
    use super::{distance_reward, gae, train, PyCheckpoint, PyEnv, PyLayout, PyMlp};
}
