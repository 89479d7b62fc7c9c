use std::time::Instant;

use rand::SeedableRng;
use serde::Serialize;

use super::config::PolicyKind;
use super::{HarnessError, Result};
use crate::agents::{AcAgent, AcConfig, DqnAgent, DqnConfig, Policy, SimRng};
use crate::env::{EnvState, PatternSpec, StepRules};

/// Neuron-level multiply counts of one decision step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpCounts {
    pub ac: u64,
    pub dqn: u64,
    pub ratio: f64,
}

/// `sum_i d_i * d_{i+1}` over a layer-size chain that starts at the input.
fn chain_products(dims: &[usize]) -> Result<u64> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(HarnessError::Config(format!("layer chain {dims:?} needs at least two positive sizes")));
    }
    Ok(dims.windows(2).map(|w| (w[0] * w[1]) as u64).sum())
}

/// Actor plus twice the critic for actor-critic; `minibatch` forward passes
/// of the Q-network for DQN. Each chain starts with the input size `K`.
pub fn op_counts(actor: &[usize], critic: &[usize], dqn: &[usize], minibatch: u64) -> Result<OpCounts> {
    if actor.first() != critic.first() || actor.first() != dqn.first() {
        return Err(HarnessError::Config("all networks must share the input size".into()));
    }
    if minibatch == 0 {
        return Err(HarnessError::Config("minibatch must be positive".into()));
    }
    let ac = chain_products(actor)? + 2 * chain_products(critic)?;
    let dqn = minibatch * chain_products(dqn)?;
    Ok(OpCounts {
        ac,
        dqn,
        ratio: ac as f64 / dqn as f64,
    })
}

/// Op counts for the default agents on `n` channels with one channel per
/// decision.
pub fn default_op_counts(n: usize, minibatch: u64) -> Result<OpCounts> {
    let ac = AcConfig::default();
    let k = n * ac.omega;
    let actor = [k, ac.hidden, n];
    let critic = [k, ac.hidden, 1];
    // the Q-network mirrors the actor so the two are the same size
    op_counts(&actor, &critic, &actor, minibatch)
}

/// Mean wall-clock seconds of one select plus learn, environment excluded.
///
/// The agent first runs `warmup` slots (for DQN at least one batch, so that
/// replay training is active) on a single-good round-robin pattern.
pub fn measure_decision_time(
    kind: PolicyKind,
    n: usize,
    ac: &AcConfig,
    dqn: &DqnConfig,
    warmup: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(HarnessError::Config("trials must be positive".into()));
    }
    let mut policy: Box<dyn Policy> = match kind {
        PolicyKind::Ac => Box::new(AcAgent::new(n, 1, ac.clone(), seed)?),
        PolicyKind::Dqn => Box::new(DqnAgent::new(n, 1, dqn.clone(), seed)?),
        other => {
            return Err(HarnessError::Config(format!(
                "decision timing covers learning agents, not {}",
                other.as_str()
            )))
        }
    };
    let warmup = match kind {
        PolicyKind::Dqn => warmup.max(dqn.batch),
        _ => warmup,
    };
    let mut env = EnvState::new(PatternSpec::round_robin(n, 1, 0.9)?);
    let rules = StepRules::single_user();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut total = 0.0;
    for slot in 0..warmup + trials {
        let start = Instant::now();
        let action = policy.select(&mut rng)?;
        let mut spent = start.elapsed().as_secs_f64();
        let outcome = env.step(&[action], &rules, &mut rng)?;
        let start = Instant::now();
        policy.learn(outcome.per_user_reward[0], outcome.observe(0)?, &mut rng)?;
        spent += start.elapsed().as_secs_f64();
        if slot >= warmup {
            total += spent;
        }
    }
    Ok(total / trials as f64)
}
