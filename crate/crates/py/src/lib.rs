//! Python bindings: patterns, the slot environment, the actor-critic and DQN
//! agents, operation counts and whole experiment runs.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;

use mcaccess::agents::{self, AgentError, Policy, SelectMode, SimRng};
use mcaccess::env::{self, ChannelAction, CollisionDiscount, EnvError, EnvState, PatternSpec, RewardMode, StepRules};
use mcaccess::harness::{self, derive_seed, ExperimentConfig, HarnessError};
use mcaccess::numerics::Optimizer;

fn env_err(e: EnvError) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn agent_err(e: AgentError) -> PyErr {
    match e {
        AgentError::Config(_) | AgentError::ObservationDim { .. } => PyValueError::new_err(e.to_string()),
        AgentError::Env(inner) => env_err(inner),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn harness_err(e: HarnessError) -> PyErr {
    if e.exit_code() == 1 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_optimizer(name: &str) -> PyResult<Optimizer> {
    match name {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        _ => Err(PyValueError::new_err(format!("unknown optimizer `{name}` (sgd or adam)"))),
    }
}

fn parse_mode(name: &str) -> PyResult<RewardMode> {
    match name {
        "single_user" => Ok(RewardMode::SingleUser),
        "multi_share" => Ok(RewardMode::MultiShare),
        "multi_primary_share" => Ok(RewardMode::MultiPrimaryShare),
        "multi_primary_exclusive" => Ok(RewardMode::MultiPrimaryExclusive),
        _ => Err(PyValueError::new_err(format!("unknown reward mode `{name}`"))),
    }
}

/// A cyclic channel-state pattern.
#[pyclass(name = "Pattern", module = "mcaccess_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPattern {
    inner: PatternSpec,
}

#[pymethods]
impl PyPattern {
    #[staticmethod]
    #[pyo3(signature = (n, goods = 1, switch_prob = 0.9))]
    fn round_robin(n: usize, goods: usize, switch_prob: f64) -> PyResult<Self> {
        let inner = PatternSpec::round_robin(n, goods, switch_prob).map_err(env_err)?;
        Ok(Self { inner })
    }

    /// Round-robin groups visited in a seeded random channel order.
    #[staticmethod]
    #[pyo3(signature = (n, goods, switch_prob, seed))]
    fn permutation(n: usize, goods: usize, switch_prob: f64, seed: u64) -> PyResult<Self> {
        let inner = PatternSpec::seeded_permutation(n, goods, switch_prob, seed).map_err(env_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn three_state(n: usize, excellent: usize, good: usize, switch_prob: f64) -> PyResult<Self> {
        let inner = PatternSpec::three_state(n, excellent, good, switch_prob).map_err(env_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = PatternSpec::from_toml(text).map_err(env_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn num_channels(&self) -> usize {
        self.inner.num_channels()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn switch_prob(&self) -> f64 {
        self.inner.switch_prob()
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    /// One string of condition codes (`B`, `G`, `E`) per state.
    fn states(&self) -> Vec<String> {
        self.inner
            .states()
            .iter()
            .map(|row| row.iter().map(|c| c.code()).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Pattern(num_channels={}, num_states={}, switch_prob={})",
            self.inner.num_channels(),
            self.inner.num_states(),
            self.inner.switch_prob()
        )
    }
}

/// The slot environment: a pattern chain plus reward rules.
#[pyclass(name = "Env", module = "mcaccess_py")]
pub struct PyEnv {
    state: EnvState,
    rules: StepRules,
    rng: SimRng,
}

#[pymethods]
impl PyEnv {
    /// `discount=None` splits a shared channel as `1/m`; a number `c` gives `c/m`.
    #[new]
    #[pyo3(signature = (pattern, seed = 0, reward_mode = "single_user", primary = None, discount = None))]
    fn new(pattern: &PyPattern, seed: u64, reward_mode: &str, primary: Option<usize>, discount: Option<f64>) -> PyResult<Self> {
        let mode = parse_mode(reward_mode)?;
        if mode.has_primary() != primary.is_some() {
            return Err(PyValueError::new_err(format!(
                "reward mode `{reward_mode}` {} a primary user",
                if mode.has_primary() { "needs" } else { "does not take" }
            )));
        }
        let discount = match discount {
            None => CollisionDiscount::Inverse,
            Some(c) if c > 0.0 && c <= 1.0 => CollisionDiscount::Scaled(c),
            Some(c) => return Err(PyValueError::new_err(format!("discount {c} outside (0, 1]"))),
        };
        Ok(Self {
            state: EnvState::new(pattern.inner.clone()),
            rules: StepRules {
                mode,
                primary,
                discount,
            },
            rng: SimRng::seed_from_u64(seed),
        })
    }

    #[getter]
    fn slot(&self) -> u64 {
        self.state.slot()
    }

    #[getter]
    fn state_index(&self) -> usize {
        self.state.state_index()
    }

    #[getter]
    fn num_channels(&self) -> usize {
        self.state.num_channels()
    }

    fn conditions(&self) -> String {
        self.state.conditions().iter().map(|c| c.code()).collect()
    }

    /// Resolves one slot for the given per-user channel lists and advances
    /// the chain.
    fn step<'py>(&mut self, py: Python<'py>, actions: Vec<Vec<usize>>) -> PyResult<Bound<'py, PyDict>> {
        let n = self.state.num_channels();
        let actions = actions
            .into_iter()
            .map(|c| ChannelAction::new(c, n))
            .collect::<env::Result<Vec<_>>>()
            .map_err(env_err)?;
        let out = self.state.step(&actions, &self.rules, &mut self.rng).map_err(env_err)?;
        let labels: Vec<Vec<&str>> = out
            .labels
            .iter()
            .map(|ls| ls.iter().map(|l| l.as_str()).collect())
            .collect();
        let d = PyDict::new(py);
        d.set_item("slot", out.slot)?;
        d.set_item("state_index", out.state_index)?;
        d.set_item("rewards", out.per_user_reward)?;
        d.set_item("observations", out.per_user_observation)?;
        d.set_item("occupancy", out.occupancy)?;
        d.set_item("labels", labels)?;
        Ok(d)
    }
}

/// Actor-critic agent. `select` then `learn` once per slot.
#[pyclass(name = "AcAgent", module = "mcaccess_py")]
pub struct PyAcAgent {
    inner: agents::AcAgent,
    rng: SimRng,
}

#[pymethods]
impl PyAcAgent {
    #[new]
    #[pyo3(signature = (
        num_channels, k = 1, seed = 0, *, hidden = 200, omega = 16, gamma = 0.9,
        lr_actor = 1e-4, lr_critic = 5e-4, entropy_coef = 0.0, optimizer = "sgd", argmax = false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        num_channels: usize,
        k: usize,
        seed: u64,
        hidden: usize,
        omega: usize,
        gamma: f64,
        lr_actor: f64,
        lr_critic: f64,
        entropy_coef: f64,
        optimizer: &str,
        argmax: bool,
    ) -> PyResult<Self> {
        let config = agents::AcConfig {
            hidden,
            omega,
            gamma,
            lr_actor,
            lr_critic,
            entropy_coef,
            optimizer: parse_optimizer(optimizer)?,
            mode: if argmax { SelectMode::Argmax } else { SelectMode::Sample },
            ..agents::AcConfig::default()
        };
        let inner = agents::AcAgent::new(num_channels, k, config, derive_seed(seed, 0)).map_err(agent_err)?;
        Ok(Self {
            inner,
            rng: SimRng::seed_from_u64(derive_seed(seed, 1)),
        })
    }

    /// Channels chosen for this slot.
    fn select(&mut self) -> PyResult<Vec<usize>> {
        let a = self.inner.select(&mut self.rng).map_err(agent_err)?;
        Ok(a.channels().to_vec())
    }

    /// Applies the slot's reward and observation row; returns the TD error.
    fn learn(&mut self, reward: f64, observation: Vec<f64>) -> PyResult<f64> {
        self.inner.learn_step(reward, &observation).map_err(agent_err)
    }

    /// Action probabilities for the current observation stack.
    fn policy(&self) -> PyResult<Vec<f64>> {
        self.inner.policy().map_err(agent_err)
    }

    fn value(&self) -> PyResult<f64> {
        self.inner.value().map_err(agent_err)
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps()
    }

    /// Current (actor, critic) learning rates.
    #[getter]
    fn learning_rates(&self) -> (f64, f64) {
        self.inner.learning_rates()
    }

    fn reset_learning_rates(&mut self) {
        self.inner.reset_learning_rates();
    }
}

/// DQN baseline with experience replay.
#[pyclass(name = "DqnAgent", module = "mcaccess_py")]
pub struct PyDqnAgent {
    inner: agents::DqnAgent,
    rng: SimRng,
}

#[pymethods]
impl PyDqnAgent {
    #[new]
    #[pyo3(signature = (
        num_channels, k = 1, seed = 0, *, hidden = vec![200, 200], omega = 16, gamma = 0.9,
        lr = 1e-3, batch = 32, capacity = 100_000, anneal_slots = None, optimizer = "sgd"
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        num_channels: usize,
        k: usize,
        seed: u64,
        hidden: Vec<usize>,
        omega: usize,
        gamma: f64,
        lr: f64,
        batch: usize,
        capacity: usize,
        anneal_slots: Option<u64>,
        optimizer: &str,
    ) -> PyResult<Self> {
        let config = agents::DqnConfig {
            hidden,
            omega,
            gamma,
            lr,
            batch,
            capacity,
            anneal_slots,
            optimizer: parse_optimizer(optimizer)?,
            ..agents::DqnConfig::default()
        };
        let inner = agents::DqnAgent::new(num_channels, k, config, derive_seed(seed, 0)).map_err(agent_err)?;
        Ok(Self {
            inner,
            rng: SimRng::seed_from_u64(derive_seed(seed, 1)),
        })
    }

    fn select(&mut self) -> PyResult<Vec<usize>> {
        let a = self.inner.select(&mut self.rng).map_err(agent_err)?;
        Ok(a.channels().to_vec())
    }

    /// Stores the transition and trains one minibatch once the buffer holds
    /// enough; returns the batch loss when a batch was trained.
    fn learn(&mut self, reward: f64, observation: Vec<f64>) -> PyResult<Option<f64>> {
        self.inner.learn_step(reward, &observation, &mut self.rng).map_err(agent_err)
    }

    fn q_values(&self) -> PyResult<Vec<f64>> {
        self.inner.q_values().map_err(agent_err)
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn replay_len(&self) -> usize {
        self.inner.replay().len()
    }
}

fn counts_dict<'py>(py: Python<'py>, c: harness::OpCounts) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ac", c.ac)?;
    d.set_item("dqn", c.dqn)?;
    d.set_item("ratio", c.ratio)?;
    Ok(d)
}

/// Per-decision multiply counts for the default network shapes at `n` channels.
#[pyfunction]
#[pyo3(signature = (n, minibatch = 32))]
fn default_op_counts(py: Python<'_>, n: usize, minibatch: u64) -> PyResult<Bound<'_, PyDict>> {
    let c = harness::default_op_counts(n, minibatch).map_err(harness_err)?;
    counts_dict(py, c)
}

/// Multiply counts for explicit layer chains, each starting at the input size.
#[pyfunction]
#[pyo3(signature = (actor, critic, dqn, minibatch = 32))]
fn op_counts(py: Python<'_>, actor: Vec<usize>, critic: Vec<usize>, dqn: Vec<usize>, minibatch: u64) -> PyResult<Bound<'_, PyDict>> {
    let c = harness::op_counts(&actor, &critic, &dqn, minibatch).map_err(harness_err)?;
    counts_dict(py, c)
}

fn run_config<'py>(py: Python<'py>, mut cfg: ExperimentConfig, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let p = cfg.pattern.build(None).map_err(harness_err)?.switch_prob();
    let log = py.detach(|| harness::run(&cfg)).map_err(harness_err)?;
    let rows = harness::summarize(&cfg, p, &log).map_err(harness_err)?;
    let eval = cfg.eval_start() as usize..log.num_slots();

    let users = PyDict::new(py);
    for (u, row) in rows.iter().enumerate() {
        let d = PyDict::new(py);
        d.set_item("eval_avg", row.eval_avg)?;
        d.set_item("full_avg", row.full_avg)?;
        d.set_item("collision", row.collision)?;
        d.set_item("bad", row.bad)?;
        d.set_item("window_averages", log.window_averages(Some(u)).map_err(harness_err)?)?;
        let dist = log.outcome_distribution(u, eval.clone()).map_err(harness_err)?;
        let outcomes = PyDict::new(py);
        for l in env::OutcomeLabel::ALL {
            outcomes.set_item(l.as_str(), dist[l.index()])?;
        }
        d.set_item("outcomes", outcomes)?;
        users.set_item(&row.name, d)?;
    }
    let out = PyDict::new(py);
    out.set_item("seed", cfg.seed)?;
    out.set_item("slots", log.num_slots())?;
    out.set_item("window", log.window())?;
    out.set_item("window_averages", log.window_averages(None).map_err(harness_err)?)?;
    out.set_item("users", users)?;
    Ok(out)
}

/// Runs an experiment given as TOML text. Pattern files referenced by
/// relative path resolve against the working directory.
#[pyfunction]
#[pyo3(signature = (config, seed = None))]
fn run_experiment<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(harness_err)?;
    run_config(py, cfg, seed)
}

/// Runs the experiment described by a TOML config file.
#[pyfunction]
#[pyo3(signature = (path, seed = None))]
fn run_config_file<'py>(py: Python<'py>, path: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::load(Path::new(path)).map_err(harness_err)?;
    run_config(py, cfg, seed)
}

#[pymodule]
pub fn mcaccess_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPattern>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyAcAgent>()?;
    m.add_class::<PyDqnAgent>()?;
    m.add_function(wrap_pyfunction!(default_op_counts, m)?)?;
    m.add_function(wrap_pyfunction!(op_counts, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_config_file, m)?)?;
    Ok(())
}
