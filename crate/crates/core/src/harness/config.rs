use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agents::{AcConfig, DqnConfig};
use crate::env::{CollisionDiscount, PatternSpec, RewardMode};

/// Where a run's switching pattern comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSource {
    RoundRobin {
        channels: usize,
        #[serde(default = "one")]
        goods: usize,
        switch_prob: f64,
    },
    /// Round-robin relabeled by an explicit permutation or one drawn from
    /// `seed`.
    Permutation {
        channels: usize,
        #[serde(default = "one")]
        goods: usize,
        switch_prob: f64,
        #[serde(default)]
        permutation: Option<Vec<usize>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    ThreeState {
        channels: usize,
        excellent: usize,
        good: usize,
        switch_prob: f64,
    },
    /// A pattern file; relative paths resolve against the config file.
    File { path: PathBuf },
    Inline { spec: PatternSpec },
}

fn one() -> usize {
    1
}

impl PatternSource {
    pub fn build(&self, base: Option<&Path>) -> Result<PatternSpec> {
        let spec = match self {
            PatternSource::RoundRobin {
                channels,
                goods,
                switch_prob,
            } => PatternSpec::round_robin(*channels, *goods, *switch_prob)?,
            PatternSource::Permutation {
                channels,
                goods,
                switch_prob,
                permutation,
                seed,
            } => match (permutation, seed) {
                (Some(perm), None) => PatternSpec::permutation(*channels, *goods, *switch_prob, perm)?,
                (None, Some(seed)) => PatternSpec::seeded_permutation(*channels, *goods, *switch_prob, *seed)?,
                _ => {
                    return Err(HarnessError::Config(
                        "permutation pattern needs exactly one of `permutation` or `seed`".into(),
                    ))
                }
            },
            PatternSource::ThreeState {
                channels,
                excellent,
                good,
                switch_prob,
            } => PatternSpec::three_state(*channels, *excellent, *good, *switch_prob)?,
            PatternSource::File { path } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                PatternSpec::load(&full)?
            }
            PatternSource::Inline { spec } => {
                spec.validate()?;
                spec.clone()
            }
        };
        Ok(spec)
    }

    /// Same source with a different switching probability.
    pub fn with_switch_prob(&self, p: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            PatternSource::RoundRobin { switch_prob, .. }
            | PatternSource::Permutation { switch_prob, .. }
            | PatternSource::ThreeState { switch_prob, .. } => *switch_prob = p,
            PatternSource::Inline { spec } => *spec = spec.with_switch_prob(p)?,
            PatternSource::File { .. } => {
                return Err(HarnessError::Config("cannot override the switch probability of a pattern file".into()))
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Ac,
    Dqn,
    Random,
    Whittle,
    Genie,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ac => "ac",
            PolicyKind::Dqn => "dqn",
            PolicyKind::Random => "random",
            PolicyKind::Whittle => "whittle",
            PolicyKind::Genie => "genie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub policy: PolicyKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub primary: bool,
    /// Restore the initial learning rates whenever a completed metric window
    /// averages below zero.
    #[serde(default)]
    pub reset_on_negative: bool,
    /// Genie only: number of best-ranked channels to leave to other users.
    #[serde(default)]
    pub rank_offset: usize,
    #[serde(default)]
    pub ac: Option<AcConfig>,
    #[serde(default)]
    pub dqn: Option<DqnConfig>,
}

impl UserSpec {
    pub fn new(policy: PolicyKind) -> Self {
        Self {
            policy,
            name: None,
            k: 1,
            primary: false,
            reset_on_negative: false,
            rank_offset: 0,
            ac: None,
            dqn: None,
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.policy.as_str(), index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeSpec {
    pub slot: u64,
    pub pattern: PatternSource,
}

/// One experiment: pattern, users, horizon and bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub horizon: u64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub reward_mode: RewardMode,
    #[serde(default)]
    pub discount: CollisionDiscount,
    /// Fraction of the horizon, counted from the end, used for reported
    /// averages.
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    #[serde(default = "default_probe")]
    pub probe_slots: usize,
    #[serde(default)]
    pub record_timings: bool,
    pub pattern: PatternSource,
    #[serde(default)]
    pub change: Option<ChangeSpec>,
    /// Defaults for users that do not carry their own agent block.
    #[serde(default)]
    pub ac: AcConfig,
    #[serde(default)]
    pub dqn: DqnConfig,
    pub users: Vec<UserSpec>,
}

fn default_window() -> usize {
    500
}

fn default_mode() -> RewardMode {
    RewardMode::SingleUser
}

fn default_eval_fraction() -> f64 {
    0.2
}

fn default_probe() -> usize {
    10_000
}

impl ExperimentConfig {
    /// A single user on `pattern` with every other field at its default.
    pub fn single(pattern: PatternSource, policy: PolicyKind, horizon: u64, seed: u64) -> Self {
        Self {
            name: None,
            horizon,
            window: default_window(),
            seed,
            reward_mode: RewardMode::SingleUser,
            discount: CollisionDiscount::default(),
            eval_fraction: default_eval_fraction(),
            probe_slots: default_probe(),
            record_timings: false,
            pattern,
            change: None,
            ac: AcConfig::default(),
            dqn: DqnConfig::default(),
            users: vec![UserSpec::new(policy)],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // resolve pattern files now so the config stays valid wherever it runs
        let base = path.parent();
        if matches!(cfg.pattern, PatternSource::File { .. }) {
            cfg.pattern = PatternSource::Inline {
                spec: cfg.pattern.build(base)?,
            };
        }
        if let Some(change) = &mut cfg.change {
            if matches!(change.pattern, PatternSource::File { .. }) {
                change.pattern = PatternSource::Inline {
                    spec: change.pattern.build(base)?,
                };
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        if self.window == 0 {
            return fail("window must be positive".into());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction <= 1.0) {
            return fail(format!("eval_fraction {} outside (0, 1]", self.eval_fraction));
        }
        if self.users.is_empty() {
            return fail("at least one user is required".into());
        }
        match self.reward_mode {
            RewardMode::SingleUser if self.users.len() != 1 => {
                return fail(format!("single_user mode with {} users", self.users.len()))
            }
            _ => {}
        }
        let primaries = self.users.iter().filter(|u| u.primary).count();
        if self.reward_mode.has_primary() && primaries != 1 {
            return fail(format!("{:?} needs exactly one primary user, found {primaries}", self.reward_mode));
        }
        if !self.reward_mode.has_primary() && primaries > 0 {
            return fail("primary users need a priority reward mode".into());
        }
        match self.discount {
            CollisionDiscount::Scaled(c) | CollisionDiscount::Constant(c) if !(c > 0.0 && c <= 1.0) => {
                return fail(format!("collision discount constant {c} outside (0, 1]"));
            }
            _ => {}
        }
        if let Some(change) = &self.change {
            if change.slot >= self.horizon {
                return fail(format!("change slot {} is not before the horizon {}", change.slot, self.horizon));
            }
        }
        self.ac.validate()?;
        self.dqn.validate()?;
        for (i, u) in self.users.iter().enumerate() {
            if u.k == 0 {
                return fail(format!("user {i}: k must be positive"));
            }
            if let Some(ac) = &u.ac {
                ac.validate()?;
            }
            if let Some(dqn) = &u.dqn {
                dqn.validate()?;
            }
            if u.reset_on_negative && u.policy != PolicyKind::Ac {
                return fail(format!("user {i}: reset_on_negative only applies to ac users"));
            }
        }
        Ok(())
    }

    /// First slot of the evaluation range.
    pub fn eval_start(&self) -> u64 {
        let eval = ((self.horizon as f64) * self.eval_fraction).round() as u64;
        self.horizon - eval.clamp(1, self.horizon)
    }

    pub fn primary_user(&self) -> Option<usize> {
        self.users.iter().position(|u| u.primary)
    }

    pub fn ac_for(&self, user: usize) -> AcConfig {
        self.users[user].ac.clone().unwrap_or_else(|| self.ac.clone())
    }

    /// DQN settings for `user`, with an open anneal length set to a fifth of
    /// the horizon.
    pub fn dqn_for(&self, user: usize) -> DqnConfig {
        let mut cfg = self.users[user].dqn.clone().unwrap_or_else(|| self.dqn.clone());
        if cfg.anneal_slots.is_none() {
            cfg.anneal_slots = Some(self.horizon / 5);
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "priority"
horizon = 1000
seed = 7
reward_mode = "multi_primary_exclusive"

[pattern]
kind = "three_state"
channels = 16
excellent = 2
good = 4
switch_prob = 0.9

[ac]
lr_actor = 0.004
lr_critic = 0.015

[[users]]
policy = "ac"
primary = true

[[users]]
policy = "ac"
reset_on_negative = true

[[users]]
policy = "dqn"
[users.dqn]
batch = 8
capacity = 100
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.users.len(), 3);
        assert_eq!(cfg.window, 500);
        assert_eq!(cfg.primary_user(), Some(0));
        assert_eq!(cfg.ac_for(1).lr_actor, 0.004);
        assert_eq!(cfg.ac_for(1).hidden, 200);
        assert_eq!(cfg.dqn_for(2).batch, 8);
        assert_eq!(cfg.dqn_for(2).anneal_slots, Some(200));
        assert_eq!(cfg.eval_start(), 800);
        let spec = cfg.pattern.build(None).unwrap();
        assert_eq!(spec.num_channels(), 16);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let primary_missing = SAMPLE.replace("primary = true", "");
        assert!(matches!(
            ExperimentConfig::from_toml(&primary_missing),
            Err(HarnessError::Config(_))
        ));
        let late_change = format!(
            "{SAMPLE}\n[change]\nslot = 1000\npattern = {{ kind = \"round_robin\", channels = 16, switch_prob = 0.9 }}\n"
        );
        assert!(ExperimentConfig::from_toml(&late_change).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("horizon = 1000", "horizon = 0")).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("seed = 7", "sede = 7")).is_err());
        let bad_rates = SAMPLE.replace("lr_actor = 0.004", "lr_actor = 0.04");
        assert!(ExperimentConfig::from_toml(&bad_rates).is_err());
    }

    #[test]
    fn permutation_source_needs_one_choice() {
        let src = PatternSource::Permutation {
            channels: 4,
            goods: 1,
            switch_prob: 0.9,
            permutation: None,
            seed: None,
        };
        assert!(src.build(None).is_err());
        let src = PatternSource::Permutation {
            channels: 4,
            goods: 1,
            switch_prob: 0.9,
            permutation: Some(vec![3, 2, 1, 0]),
            seed: None,
        };
        let spec = src.build(None).unwrap();
        assert!(spec.state(0)[3].is_usable());
        let moved = src.with_switch_prob(0.5).unwrap().build(None).unwrap();
        assert_eq!(moved.switch_prob(), 0.5);
    }
}
