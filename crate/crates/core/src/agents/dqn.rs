//! Deep Q-network baseline: epsilon-greedy over a Q-head, uniform replay, no
//! target network.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::actor_critic::argmax;
use super::{AgentError, ObservationStack, Policy, Result, SimRng};
use crate::env::{ActionSpace, ChannelAction};
use crate::numerics::{Activation, Adam, AdamParams, ForwardTrace, Gradients, Mlp, Optimizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub omega: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Slots over which epsilon falls linearly. `None` lets the harness pick
    /// a fraction of the horizon.
    pub anneal_slots: Option<u64>,
    pub optimizer: Optimizer,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![200, 200],
            omega: 16,
            gamma: 0.9,
            lr: 0.001,
            batch: 32,
            capacity: 100_000,
            epsilon_start: 1.0,
            epsilon_end: 0.02,
            anneal_slots: None,
            optimizer: Optimizer::Sgd,
        }
    }
}

/// Anneal length used when the config leaves it open and no horizon is known.
pub(crate) const DEFAULT_ANNEAL_SLOTS: u64 = 40_000;

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if self.hidden.is_empty() || self.hidden.contains(&0) || self.omega == 0 {
            return fail("hidden widths and omega must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail("learning rate must be non-negative");
        }
        if self.batch == 0 || self.capacity < self.batch {
            return fail("batch must be positive and no larger than the replay capacity");
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return fail("epsilon endpoints must lie in [0, 1]");
        }
        Ok(())
    }

    /// Exploration rate after `step` learning slots.
    pub fn epsilon(&self, step: u64) -> f64 {
        let span = self.anneal_slots.unwrap_or(DEFAULT_ANNEAL_SLOTS);
        if span == 0 {
            return self.epsilon_end;
        }
        let frac = (step as f64 / span as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Non-zero entries of a dense vector. Observation stacks are mostly zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn from_dense(dense: &[f64]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self {
            dim: dense.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn write_dense(&self, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.dim, 0.0);
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.write_dense(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SparseVec,
    pub action: usize,
    pub reward: f64,
    pub next_state: SparseVec,
}

/// Fixed-capacity ring buffer; once full, each push evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` distinct entries drawn uniformly.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    name: String,
    config: DqnConfig,
    space: ActionSpace,
    qnet: Mlp,
    replay: ReplayBuffer,
    stack: ObservationStack,
    steps: u64,
    pending: Option<usize>,
    grads: Gradients,
    adam: Option<Adam>,
    buf: Vec<f64>,
    trace: ForwardTrace,
    next_trace: ForwardTrace,
}

impl DqnAgent {
    pub fn new(num_channels: usize, k: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let space = ActionSpace::new(num_channels, k)?;
        let mut dims = vec![num_channels * config.omega];
        dims.extend(&config.hidden);
        dims.push(space.size());
        let mut acts = vec![Activation::Relu; config.hidden.len()];
        acts.push(Activation::Identity);
        let qnet = Mlp::init(&dims, &acts, seed)?;
        Ok(Self {
            name: "dqn".into(),
            adam: (config.optimizer == Optimizer::Adam).then(|| Adam::new(&qnet, AdamParams::default())),
            grads: Gradients::zeros_like(&qnet),
            replay: ReplayBuffer::new(config.capacity),
            stack: ObservationStack::new(num_channels, config.omega),
            config,
            space,
            qnet,
            steps: 0,
            pending: None,
            buf: Vec::new(),
            trace: ForwardTrace::default(),
            next_trace: ForwardTrace::default(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn qnet(&self) -> &Mlp {
        &self.qnet
    }

    pub fn qnet_mut(&mut self) -> &mut Mlp {
        &mut self.qnet
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn stack(&self) -> &ObservationStack {
        &self.stack
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon(self.steps)
    }

    pub fn q_values(&self) -> Result<Vec<f64>> {
        Ok(self.qnet.forward(self.stack.as_flat())?.output().to_vec())
    }

    /// Epsilon-greedy choice on the current stack.
    pub fn select_index(&mut self, rng: &mut SimRng) -> Result<usize> {
        let eps = self.epsilon();
        let index = if eps > 0.0 && rng.random::<f64>() < eps {
            rng.random_range(0..self.space.size())
        } else {
            self.qnet.forward_into(self.stack.as_flat(), &mut self.trace)?;
            argmax(self.trace.output())
        };
        self.pending = Some(index);
        Ok(index)
    }

    /// Stores the slot's transition and, once the replay holds a full batch,
    /// takes one minibatch step. Returns the batch loss before the step.
    pub fn learn_step(&mut self, reward: f64, observation: &[f64], rng: &mut SimRng) -> Result<Option<f64>> {
        if observation.len() != self.space.num_channels() {
            return Err(AgentError::ObservationDim {
                expected: self.space.num_channels(),
                got: observation.len(),
            });
        }
        if !reward.is_finite() {
            return Err(AgentError::Config(format!("non-finite reward {reward}")));
        }
        let action = self.pending.take().ok_or(AgentError::NotSelected)?;
        let state = SparseVec::from_dense(self.stack.as_flat());
        self.stack.push(observation);
        let next_state = SparseVec::from_dense(self.stack.as_flat());
        self.replay.push(Transition {
            state,
            action,
            reward,
            next_state,
        });
        self.steps += 1;
        if self.replay.len() < self.config.batch {
            return Ok(None);
        }
        let replay = std::mem::replace(&mut self.replay, ReplayBuffer::new(1));
        let batch = replay.sample(self.config.batch, rng);
        let loss = self.train_batch(&batch);
        drop(batch);
        self.replay = replay;
        loss.map(Some)
    }

    /// One gradient step on the mean squared Bellman error of `batch`, with
    /// targets from the current network. Returns the loss before the step.
    pub fn train_batch(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(AgentError::Config("empty batch".into()));
        }
        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut d_head = vec![0.0; self.space.size()];
        for t in batch {
            if t.action >= d_head.len() {
                return Err(AgentError::Config(format!("replayed action {} out of range", t.action)));
            }
            t.next_state.write_dense(&mut self.buf);
            self.qnet.forward_into(&self.buf, &mut self.next_trace)?;
            let best_next = self.next_trace.output().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let target = t.reward + self.config.gamma * best_next;

            t.state.write_dense(&mut self.buf);
            self.qnet.forward_into(&self.buf, &mut self.trace)?;
            let err = self.trace.output()[t.action] - target;
            loss += err * err;
            d_head[t.action] = scale * err;
            self.qnet.accumulate(&self.trace, &d_head, &mut self.grads)?;
            d_head[t.action] = 0.0;
        }
        match &mut self.adam {
            None => self.qnet.apply(&mut self.grads, -self.config.lr)?,
            Some(adam) => adam.apply(&mut self.qnet, &mut self.grads, -self.config.lr)?,
        }
        Ok(loss / batch.len() as f64)
    }
}

impl Policy for DqnAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, rng: &mut SimRng) -> Result<ChannelAction> {
        let index = self.select_index(rng)?;
        Ok(self.space.unrank(index)?)
    }

    fn learn(&mut self, reward: f64, observation: &[f64], rng: &mut SimRng) -> Result<()> {
        self.learn_step(reward, observation, rng).map(|_| ())
    }

    fn last_action_index(&self) -> Option<usize> {
        self.pending
    }

    fn learning_rate(&self) -> Option<f64> {
        Some(self.config.lr)
    }
}
