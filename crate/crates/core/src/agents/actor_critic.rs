//! The actor-critic agent.
//!
//! The actor maps the observation stack to a softmax over all `C(N, k)`
//! channel subsets; the critic maps the same stack to a scalar value. Each
//! slot the critic regresses toward the one-step TD target and the actor takes
//! a TD-weighted log-probability ascent step. No replay is kept.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, ObservationStack, Policy, Result, SimRng};
use crate::env::{ActionSpace, ChannelAction};
use crate::numerics::{Activation, Adam, AdamParams, ForwardTrace, Gradients, Mlp, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    /// Draw the action from the actor's softmax.
    #[default]
    Sample,
    /// Take the most probable action (lowest index on ties).
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcConfig {
    pub hidden: usize,
    pub omega: usize,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub decay_rate: f64,
    pub decay_period: u64,
    pub mode: SelectMode,
    /// Weight of an entropy bonus added to the actor step. Zero gives the
    /// plain TD-weighted log-probability update.
    pub entropy_coef: f64,
    pub optimizer: Optimizer,
}

impl Default for AcConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            omega: 16,
            gamma: 0.9,
            lr_actor: 0.0001,
            lr_critic: 0.0005,
            decay_rate: 0.95,
            decay_period: 50_000,
            mode: SelectMode::Sample,
            entropy_coef: 0.0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl AcConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(AgentError::Config(m.to_string()));
        if self.hidden == 0 || self.omega == 0 {
            return fail("hidden width and omega must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(self.lr_actor >= 0.0 && self.lr_critic >= 0.0) {
            return fail("learning rates must be non-negative");
        }
        if self.lr_actor >= self.lr_critic && self.lr_critic > 0.0 {
            return fail("the actor learning rate must be smaller than the critic's");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) || self.decay_period == 0 {
            return fail("decay rate must be in (0, 1] and the decay period positive");
        }
        Ok(())
    }
}

/// `R + gamma * V(next) - V(current)`.
pub fn td_error(reward: f64, gamma: f64, v_current: f64, v_next: f64) -> f64 {
    reward + gamma * v_next - v_current
}

#[derive(Debug, Clone)]
struct Pending {
    index: usize,
    trace: ForwardTrace,
}

#[derive(Debug, Clone)]
struct AdamState {
    actor: Adam,
    critic: Adam,
    actor_grads: Gradients,
    critic_grads: Gradients,
}

impl AdamState {
    fn new(actor: &Mlp, critic: &Mlp) -> Self {
        Self {
            actor: Adam::new(actor, AdamParams::default()),
            critic: Adam::new(critic, AdamParams::default()),
            actor_grads: Gradients::zeros_like(actor),
            critic_grads: Gradients::zeros_like(critic),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcAgent {
    name: String,
    config: AcConfig,
    space: ActionSpace,
    actor: Mlp,
    critic: Mlp,
    stack: ObservationStack,
    lr_actor: f64,
    lr_critic: f64,
    steps: u64,
    pending: Option<Pending>,
    last_index: Option<usize>,
    critic_now: ForwardTrace,
    critic_next: ForwardTrace,
    adam: Option<Box<AdamState>>,
}

impl AcAgent {
    pub fn new(num_channels: usize, k: usize, config: AcConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let space = ActionSpace::new(num_channels, k)?;
        let input = num_channels * config.omega;
        let actor = Mlp::init(
            &[input, config.hidden, space.size()],
            &[Activation::Relu, Activation::Softmax],
            seed,
        )?;
        let critic = Mlp::init(
            &[input, config.hidden, 1],
            &[Activation::Relu, Activation::Identity],
            seed ^ 0x5eed_c417_1c00_0001,
        )?;
        Self::from_networks(num_channels, k, config, actor, critic)
    }

    /// Builds an agent around existing networks (e.g. loaded snapshots).
    pub fn from_networks(num_channels: usize, k: usize, config: AcConfig, actor: Mlp, critic: Mlp) -> Result<Self> {
        config.validate()?;
        let space = ActionSpace::new(num_channels, k)?;
        let input = num_channels * config.omega;
        if actor.input_dim() != input || critic.input_dim() != input {
            return Err(AgentError::Config(format!("networks must take {input} inputs")));
        }
        if actor.output_dim() != space.size() || actor.head() != Activation::Softmax {
            return Err(AgentError::Config(format!(
                "actor head must be a softmax over {} actions",
                space.size()
            )));
        }
        if critic.output_dim() != 1 {
            return Err(AgentError::Config("critic must have a scalar head".into()));
        }
        let adam = (config.optimizer == Optimizer::Adam).then(|| Box::new(AdamState::new(&actor, &critic)));
        Ok(Self {
            adam,
            name: "actor-critic".into(),
            lr_actor: config.lr_actor,
            lr_critic: config.lr_critic,
            stack: ObservationStack::new(num_channels, config.omega),
            config,
            space,
            actor,
            critic,
            steps: 0,
            pending: None,
            last_index: None,
            critic_now: ForwardTrace::default(),
            critic_next: ForwardTrace::default(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> &AcConfig {
        &self.config
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn stack(&self) -> &ObservationStack {
        &self.stack
    }

    pub fn set_mode(&mut self, mode: SelectMode) {
        self.config.mode = mode;
    }

    pub fn learning_rates(&self) -> (f64, f64) {
        (self.lr_actor, self.lr_critic)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Critic estimate for the current stack.
    pub fn value(&self) -> Result<f64> {
        Ok(self.critic.forward(self.stack.as_flat())?.output()[0])
    }

    /// Actor probabilities for the current stack.
    pub fn policy(&self) -> Result<Vec<f64>> {
        Ok(self.actor.forward(self.stack.as_flat())?.output().to_vec())
    }

    /// Forward pass on the current stack and an action draw. Returns the
    /// action, its index and the actor trace kept for the coming update.
    pub fn select_traced(&mut self, rng: &mut SimRng) -> Result<(ChannelAction, usize, &ForwardTrace)> {
        let trace = self.actor.forward(self.stack.as_flat())?;
        let probs = trace.output();
        if probs.len() != self.space.size() {
            return Err(AgentError::Config(format!(
                "actor head has {} outputs, action space has {}",
                probs.len(),
                self.space.size()
            )));
        }
        let index = match self.config.mode {
            SelectMode::Sample => sample_index(probs, rng.random::<f64>()),
            SelectMode::Argmax => argmax(probs),
        };
        let action = self.space.unrank(index)?;
        self.last_index = Some(index);
        let pending = self.pending.insert(Pending { index, trace });
        Ok((action, index, &pending.trace))
    }

    /// The TD update for the slot that was just selected. Returns the TD
    /// error.
    pub fn learn_step(&mut self, reward: f64, observation: &[f64]) -> Result<f64> {
        if observation.len() != self.space.num_channels() {
            return Err(AgentError::ObservationDim {
                expected: self.space.num_channels(),
                got: observation.len(),
            });
        }
        if !reward.is_finite() {
            return Err(AgentError::Config(format!("non-finite reward {reward}")));
        }
        let pending = self.pending.take().ok_or(AgentError::NotSelected)?;

        self.critic.forward_into(self.stack.as_flat(), &mut self.critic_now)?;
        self.stack.push(observation);
        self.critic.forward_into(self.stack.as_flat(), &mut self.critic_next)?;
        let v_now = self.critic_now.output()[0];
        let v_next = self.critic_next.output()[0];
        let delta = td_error(reward, self.config.gamma, v_now, v_next);

        let d_critic = [-2.0 * delta];
        let mut d_actor = self.actor.log_prob_grad(&pending.trace, pending.index, delta)?;
        add_entropy_grad(&mut d_actor, pending.trace.output(), self.config.entropy_coef);
        match &mut self.adam {
            None => {
                self.critic.sgd_step(&self.critic_now, &d_critic, -self.lr_critic)?;
                self.actor.sgd_step(&pending.trace, &d_actor, self.lr_actor)?;
            }
            Some(st) => {
                self.critic.accumulate(&self.critic_now, &d_critic, &mut st.critic_grads)?;
                st.critic.apply(&mut self.critic, &mut st.critic_grads, -self.lr_critic)?;
                self.actor.accumulate(&pending.trace, &d_actor, &mut st.actor_grads)?;
                st.actor.apply(&mut self.actor, &mut st.actor_grads, self.lr_actor)?;
            }
        }

        self.steps += 1;
        if self.steps.is_multiple_of(self.config.decay_period) {
            self.lr_actor *= self.config.decay_rate;
            self.lr_critic *= self.config.decay_rate;
        }
        Ok(delta)
    }
}

impl Policy for AcAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, rng: &mut SimRng) -> Result<ChannelAction> {
        Ok(self.select_traced(rng)?.0)
    }

    fn learn(&mut self, reward: f64, observation: &[f64], _rng: &mut SimRng) -> Result<()> {
        self.learn_step(reward, observation).map(|_| ())
    }

    fn last_action_index(&self) -> Option<usize> {
        self.last_index
    }

    fn reset_learning_rates(&mut self) {
        self.lr_actor = self.config.lr_actor;
        self.lr_critic = self.config.lr_critic;
    }

    fn learning_rate(&self) -> Option<f64> {
        Some(self.lr_actor)
    }
}

/// Adds `beta * dH/dz` for the softmax entropy `H` to a logit gradient.
pub(crate) fn add_entropy_grad(d_head: &mut [f64], probs: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    let h: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    for (d, &p) in d_head.iter_mut().zip(probs) {
        if p > 0.0 {
            *d -= beta * p * (p.ln() + h);
        }
    }
}

/// Inverse-CDF draw; `u` in `[0, 1)`.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver past the last bucket
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.8, 0.05, -0.4];
        let probs_of = |z: &[f64]| {
            let mut p = z.to_vec();
            crate::numerics::softmax_in_place(&mut p);
            p
        };
        let objective = |z: &[f64]| {
            let p = probs_of(z);
            let h: f64 = -p.iter().map(|q| q * q.ln()).sum::<f64>();
            0.7 * p[2].ln() + 0.3 * h
        };
        let probs = probs_of(&logits);
        let mut grad: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| 0.7 * (f64::from(u8::from(j == 2)) - p))
            .collect();
        add_entropy_grad(&mut grad, &probs, 0.3);
        let eps = 1e-6;
        for j in 0..logits.len() {
            let mut up = logits;
            let mut dn = logits;
            up[j] += eps;
            dn[j] -= eps;
            let fd = (objective(&up) - objective(&dn)) / (2.0 * eps);
            assert!((fd - grad[j]).abs() < 1e-7, "logit {j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn adam_agent_stays_finite() {
        let cfg = AcConfig {
            optimizer: Optimizer::Adam,
            entropy_coef: 0.05,
            ..small()
        };
        let mut agent = AcAgent::new(4, 1, cfg, 3).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for s in 0..2000 {
            let (a, _, _) = agent.select_traced(&mut rng).unwrap();
            let r = if a.channels()[0] == s % 4 { 1.0 } else { -1.0 };
            let obs: Vec<f64> = (0..4).map(|c| if c == a.channels()[0] { r } else { 0.0 }).collect();
            agent.learn_step(r, &obs).unwrap();
        }
        assert!(agent.actor().all_finite() && agent.critic().all_finite());
    }

    fn small() -> AcConfig {
        AcConfig {
            hidden: 8,
            omega: 2,
            ..AcConfig::default()
        }
    }

    #[test]
    fn td_error_examples() {
        assert!((td_error(1.0, 0.9, 0.2, 0.5) - 1.25).abs() < 1e-12);
        assert_eq!(td_error(0.7, 0.0, 0.3, 123.0), 0.7 - 0.3);
    }

    #[test]
    fn argmax_and_sampling() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(sample_index(&[0.2, 0.3, 0.5], 0.0), 0);
        assert_eq!(sample_index(&[0.2, 0.3, 0.5], 0.25), 1);
        assert_eq!(sample_index(&[0.2, 0.3, 0.5], 0.9999), 2);
        assert_eq!(sample_index(&[0.5, 0.5 - 1e-17, 0.0], 0.99999999999999999), 1);
    }

    #[test]
    fn default_hyperparameters() {
        let c = AcConfig::default();
        assert_eq!((c.lr_critic, c.lr_actor, c.decay_rate, c.hidden), (0.0005, 0.0001, 0.95, 200));
        assert!(c.lr_actor < c.lr_critic);
        let bad = AcConfig {
            lr_actor: 0.01,
            lr_critic: 0.001,
            ..AcConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn learn_requires_select() {
        let mut agent = AcAgent::new(4, 1, small(), 1).unwrap();
        assert_eq!(agent.learn_step(1.0, &[0.0; 4]).unwrap_err(), AgentError::NotSelected);
        let mut rng = SimRng::seed_from_u64(0);
        agent.select(&mut rng).unwrap();
        assert!(agent.learn_step(1.0, &[0.0; 3]).is_err());
        agent.select(&mut rng).unwrap();
        agent.learn_step(1.0, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(agent.learn_step(1.0, &[0.0; 4]).unwrap_err(), AgentError::NotSelected);
        assert_eq!(agent.stack().column(0), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn td_error_matches_critic_values() {
        let mut agent = AcAgent::new(3, 1, small(), 4).unwrap();
        let mut rng = SimRng::seed_from_u64(2);
        agent.select(&mut rng).unwrap();
        let v_now = agent.value().unwrap();
        let obs = [0.0, -1.0, 0.0];
        let mut probe = agent.stack().clone();
        probe.push(&obs);
        let v_next = agent.critic().forward(probe.as_flat()).unwrap().output()[0];
        let delta = agent.learn_step(-1.0, &obs).unwrap();
        assert!((delta - (-1.0 + 0.9 * v_next - v_now)).abs() < 1e-12);
    }

    #[test]
    fn zero_actor_samples_uniformly() {
        let mut agent = AcAgent::new(5, 2, small(), 0).unwrap();
        let zero = Mlp::zeros(&agent.actor().dims(), &[Activation::Relu, Activation::Softmax]).unwrap();
        *agent.actor_mut() = zero;
        let d = agent.action_space().size();
        assert_eq!(d, 10);
        let mut rng = SimRng::seed_from_u64(5);
        let draws = 100_000;
        let mut counts = vec![0usize; d];
        for _ in 0..draws {
            let (_, idx, _) = agent.select_traced(&mut rng).unwrap();
            counts[idx] += 1;
        }
        let p = 1.0 / d as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn argmax_mode_is_deterministic() {
        let mut agent = AcAgent::new(6, 1, small(), 3).unwrap();
        agent.set_mode(SelectMode::Argmax);
        let probs = agent.policy().unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..5 {
            let (_, idx, _) = agent.select_traced(&mut rng).unwrap();
            assert_eq!(idx, argmax(&probs));
        }
    }

    #[test]
    fn learning_rates_decay_and_reset() {
        let cfg = AcConfig {
            decay_period: 3,
            decay_rate: 0.5,
            ..small()
        };
        let mut agent = AcAgent::new(3, 1, cfg, 0).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..7 {
            agent.select(&mut rng).unwrap();
            agent.learn_step(0.0, &[0.0, 1.0, 0.0]).unwrap();
        }
        let (a, c) = agent.learning_rates();
        assert!((a - 0.0001 * 0.25).abs() < 1e-18 && (c - 0.0005 * 0.25).abs() < 1e-18);
        agent.reset_learning_rates();
        assert_eq!(agent.learning_rates(), (0.0001, 0.0005));
    }

    #[test]
    fn critic_converges_to_discounted_return() {
        // constant reward 1 with an unchanging observation: V -> 1 / (1 - gamma)
        let cfg = AcConfig {
            hidden: 16,
            omega: 1,
            gamma: 0.9,
            lr_actor: 0.0,
            lr_critic: 0.01,
            ..AcConfig::default()
        };
        let mut agent = AcAgent::new(2, 1, cfg, 8).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        let obs = [1.0, 0.0];
        for _ in 0..20_000 {
            agent.select(&mut rng).unwrap();
            agent.learn_step(1.0, &obs).unwrap();
        }
        let v = agent.value().unwrap();
        assert!((v - 10.0).abs() < 0.5, "{v}");
    }
}
