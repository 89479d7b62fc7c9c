use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, PolicyKind};
use super::metrics::MetricsLog;
use super::{HarnessError, Result};
use crate::agents::{AcAgent, BeliefState, DqnAgent, GeniePolicy, Policy, RandomPolicy, SimRng, WhittlePolicy};
use crate::env::{ChannelAction, EnvState, PatternSpec, StepRules};

/// Derives independent seeds for the parts of one replica.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const PROBE_STREAM: u64 = 1 << 32;

/// Usable flags of every channel over `slots` slots of a copy of `env`.
/// This is the calibration view: every channel is visible.
pub fn probe_log(env: &EnvState, slots: usize, rng: &mut SimRng) -> Vec<Vec<bool>> {
    let mut env = env.clone();
    (0..slots)
        .map(|_| {
            let row = env.conditions().iter().map(|c| c.is_usable()).collect();
            env.transition(rng);
            row
        })
        .collect()
}

/// Builds the policies of `config` in user order.
pub fn build_policies(config: &ExperimentConfig, pattern: &PatternSpec) -> Result<Vec<Box<dyn Policy>>> {
    let n = pattern.num_channels();
    let mut belief: Option<BeliefState> = None;
    let mut out: Vec<Box<dyn Policy>> = Vec::with_capacity(config.users.len());
    for (i, user) in config.users.iter().enumerate() {
        let init_seed = derive_seed(config.seed, 100 + i as u64);
        let name = user.label(i);
        let policy: Box<dyn Policy> = match user.policy {
            PolicyKind::Ac => Box::new(AcAgent::new(n, user.k, config.ac_for(i), init_seed)?.with_name(name)),
            PolicyKind::Dqn => Box::new(DqnAgent::new(n, user.k, config.dqn_for(i), init_seed)?.with_name(name)),
            PolicyKind::Random => Box::new(RandomPolicy::new(n, user.k)?),
            PolicyKind::Genie => Box::new(GeniePolicy::new(pattern.clone(), user.k)?.with_rank_offset(user.rank_offset)?),
            PolicyKind::Whittle => {
                if belief.is_none() {
                    if config.probe_slots == 0 {
                        return Err(HarnessError::Config("whittle users need probe_slots > 0".into()));
                    }
                    let mut rng = stream(config.seed, PROBE_STREAM);
                    let log = probe_log(&EnvState::new(pattern.clone()), config.probe_slots, &mut rng);
                    belief = Some(BeliefState::estimate(&log)?);
                }
                Box::new(WhittlePolicy::new(belief.clone().expect("estimated above"), user.k)?)
            }
        };
        out.push(policy);
    }
    Ok(out)
}

/// Runs one experiment to its horizon.
///
/// Every slot all users select, the environment steps once and then all
/// users learn from that slot's outcome. The change pattern, if any, takes
/// effect at the start of its slot without telling the agents.
pub fn run(config: &ExperimentConfig) -> Result<MetricsLog> {
    config.validate()?;
    let pattern = config.pattern.build(None)?;
    let change = match &config.change {
        Some(c) => Some((c.slot, c.pattern.build(None)?)),
        None => None,
    };
    let mut policies = build_policies(config, &pattern)?;
    let mut env = EnvState::new(pattern);
    let rules = StepRules {
        mode: config.reward_mode,
        primary: config.primary_user(),
        discount: config.discount,
    };
    let users = policies.len();
    let mut env_rng = stream(config.seed, 0);
    let mut user_rngs: Vec<SimRng> = (0..users).map(|u| stream(config.seed, 1 + u as u64)).collect();

    let names = config.users.iter().enumerate().map(|(i, u)| u.label(i)).collect();
    let ks = config.users.iter().map(|u| u.k).collect();
    let mut log = MetricsLog::new(names, ks, config.window, config.record_timings);
    log.reserve(config.horizon as usize);
    if let Some((slot, _)) = &change {
        log.set_change_slot(*slot);
    }

    let mut actions: Vec<ChannelAction> = Vec::with_capacity(users);
    let mut indices = vec![None; users];
    let mut times = vec![0.0; users];
    let mut window_sum = vec![0.0; users];
    let mut window_len = 0usize;

    for t in 0..config.horizon {
        if let Some((slot, next)) = &change {
            if *slot == t {
                env.replace_pattern(next.clone())?;
            }
        }
        if env.slot() != t {
            return Err(HarnessError::PhaseOrder {
                expected: t,
                found: env.slot(),
            });
        }

        actions.clear();
        for (u, policy) in policies.iter_mut().enumerate() {
            let start = config.record_timings.then(Instant::now);
            actions.push(policy.select(&mut user_rngs[u])?);
            indices[u] = policy.last_action_index();
            if let Some(s) = start {
                times[u] = s.elapsed().as_secs_f64();
            }
        }

        let outcome = env.step(&actions, &rules, &mut env_rng)?;
        if outcome.slot != t || env.slot() != t + 1 {
            return Err(HarnessError::PhaseOrder {
                expected: t,
                found: outcome.slot,
            });
        }

        for (u, policy) in policies.iter_mut().enumerate() {
            let start = config.record_timings.then(Instant::now);
            policy.learn(outcome.per_user_reward[u], outcome.observe(u)?, &mut user_rngs[u])?;
            if let Some(s) = start {
                times[u] += s.elapsed().as_secs_f64();
            }
        }

        log.push_slot(
            outcome.state_index,
            &outcome.per_user_reward,
            &outcome.labels,
            &indices,
            config.record_timings.then_some(times.as_slice()),
        );

        for (s, r) in window_sum.iter_mut().zip(&outcome.per_user_reward) {
            *s += r;
        }
        window_len += 1;
        if window_len == config.window {
            for (u, policy) in policies.iter_mut().enumerate() {
                if config.users[u].reset_on_negative && window_sum[u] < 0.0 {
                    policy.reset_learning_rates();
                }
            }
            log.push_learning_rates(policies.iter().map(|p| p.learning_rate()).collect());
            window_sum.fill(0.0);
            window_len = 0;
        }
    }
    Ok(log)
}

/// Runs `config` once per seed, in parallel. Results come back in seed
/// order.
pub fn run_replicas(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<MetricsLog>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            run(&cfg)
        })
        .collect()
}

/// Seeds `base, base + 1, ...` for `count` replicas.
pub fn replica_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}
