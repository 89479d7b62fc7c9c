//! Channel-state switching patterns.
//!
//! A pattern is a cycle of joint channel assignments. Each slot the chain
//! advances to the next assignment with probability `switch_prob` and stays
//! put otherwise.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelCondition {
    #[serde(rename = "B")]
    Bad,
    #[serde(rename = "G")]
    Good,
    #[serde(rename = "E")]
    Excellent,
}

impl ChannelCondition {
    /// Reward for accessing the channel alone, before any priority doubling.
    pub fn base_reward(self) -> f64 {
        match self {
            ChannelCondition::Bad => -1.0,
            ChannelCondition::Good => 1.0,
            ChannelCondition::Excellent => 2.0,
        }
    }

    pub fn is_usable(self) -> bool {
        self != ChannelCondition::Bad
    }

    pub fn code(self) -> char {
        match self {
            ChannelCondition::Bad => 'B',
            ChannelCondition::Good => 'G',
            ChannelCondition::Excellent => 'E',
        }
    }
}

/// The cyclic channel-state chain.
///
/// Serialized (TOML) as:
///
/// ```toml
/// num_channels = 4
/// switch_prob = 0.9
/// label = "round-robin N=4 goods=1"
/// states = [["G", "B", "B", "B"], ["B", "G", "B", "B"], ...]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    num_channels: usize,
    switch_prob: f64,
    label: String,
    states: Vec<Vec<ChannelCondition>>,
}

impl PatternSpec {
    pub fn new(
        states: Vec<Vec<ChannelCondition>>,
        switch_prob: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let spec = Self {
            num_channels: states.first().map_or(0, Vec::len),
            switch_prob,
            label: label.into(),
            states,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EnvError::Pattern(msg));
        if self.num_channels == 0 {
            return bad("pattern needs at least one channel".into());
        }
        if self.states.is_empty() {
            return bad("pattern needs at least one state".into());
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return bad(format!("switch probability {} outside [0, 1]", self.switch_prob));
        }
        let counts = |s: &[ChannelCondition]| {
            (
                s.iter().filter(|&&c| c == ChannelCondition::Good).count(),
                s.iter().filter(|&&c| c == ChannelCondition::Excellent).count(),
            )
        };
        let first = counts(&self.states[0]);
        for (idx, s) in self.states.iter().enumerate() {
            if s.len() != self.num_channels {
                return bad(format!("state {idx} has {} channels, expected {}", s.len(), self.num_channels));
            }
            if counts(s) != first {
                return bad(format!(
                    "state {idx} has (good, excellent) = {:?}, state 0 has {first:?}",
                    counts(s)
                ));
            }
        }
        Ok(())
    }

    /// Round-robin pattern with `goods` simultaneously good channels.
    ///
    /// State `s` marks channels `(s * goods + j) mod n`, `j < goods`, as good,
    /// so consecutive states hand the good set on to the next block. When
    /// `goods` divides `n` the blocks are disjoint contiguous groups and there
    /// are `n / goods` states; in general there are `n / gcd(n, goods)`.
    pub fn round_robin(n: usize, goods: usize, switch_prob: f64) -> Result<Self> {
        if n == 0 {
            return Err(EnvError::Pattern("need at least one channel".into()));
        }
        if goods == 0 || goods >= n {
            return Err(EnvError::Pattern(format!("need 1 <= goods < N, got goods={goods}, N={n}")));
        }
        let num_states = n / gcd(n, goods);
        let states = (0..num_states)
            .map(|s| {
                let mut row = vec![ChannelCondition::Bad; n];
                for j in 0..goods {
                    row[(s * goods + j) % n] = ChannelCondition::Good;
                }
                row
            })
            .collect();
        Self::new(states, switch_prob, format!("round-robin N={n} goods={goods}"))
    }

    /// Round-robin pattern with channel `i` relabelled to `permutation[i]`.
    pub fn permutation(n: usize, goods: usize, switch_prob: f64, permutation: &[usize]) -> Result<Self> {
        let base = Self::round_robin(n, goods, switch_prob)?;
        let mut spec = base.relabel(permutation)?;
        spec.label = format!("permutation N={n} goods={goods} order={permutation:?}");
        Ok(spec)
    }

    /// Round-robin pattern relabelled by a permutation drawn from `seed`.
    pub fn seeded_permutation(n: usize, goods: usize, switch_prob: f64, seed: u64) -> Result<Self> {
        let mut spec = Self::permutation(n, goods, switch_prob, &random_permutation(n, seed))?;
        spec.label = format!("permutation N={n} goods={goods} seed={seed}");
        Ok(spec)
    }

    /// Three-level pattern: a window of `excellent` excellent channels followed
    /// by `good` good channels, shifted by one channel per state (`n` states).
    pub fn three_state(n: usize, excellent: usize, good: usize, switch_prob: f64) -> Result<Self> {
        let width = excellent + good;
        if width == 0 || width >= n {
            return Err(EnvError::Pattern(format!(
                "need 1 <= excellent + good < N, got {excellent} + {good} with N={n}"
            )));
        }
        let states = (0..n)
            .map(|s| {
                let mut row = vec![ChannelCondition::Bad; n];
                for j in 0..width {
                    row[(s + j) % n] = if j < excellent {
                        ChannelCondition::Excellent
                    } else {
                        ChannelCondition::Good
                    };
                }
                row
            })
            .collect();
        Self::new(
            states,
            switch_prob,
            format!("three-state N={n} excellent={excellent} good={good}"),
        )
    }

    /// Moves the condition of channel `i` to channel `permutation[i]` in
    /// every state.
    pub fn relabel(&self, permutation: &[usize]) -> Result<Self> {
        check_bijection(permutation, self.num_channels)?;
        let states = self
            .states
            .iter()
            .map(|row| {
                let mut out = vec![ChannelCondition::Bad; row.len()];
                for (i, &c) in row.iter().enumerate() {
                    out[permutation[i]] = c;
                }
                out
            })
            .collect();
        Self::new(states, self.switch_prob, self.label.clone())
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn switch_prob(&self) -> f64 {
        self.switch_prob
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn states(&self) -> &[Vec<ChannelCondition>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[ChannelCondition] {
        &self.states[idx]
    }

    pub fn with_switch_prob(&self, switch_prob: f64) -> Result<Self> {
        let mut spec = self.clone();
        spec.switch_prob = switch_prob;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Number of good and excellent channels in every state.
    pub fn usable_per_state(&self) -> usize {
        self.states[0].iter().filter(|c| c.is_usable()).count()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pattern serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| EnvError::Pattern(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| EnvError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_bijection(permutation: &[usize], n: usize) -> Result<()> {
    if permutation.len() != n {
        return Err(EnvError::Pattern(format!(
            "permutation has {} entries, expected {n}",
            permutation.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in permutation {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(EnvError::Pattern(format!("{permutation:?} is not a bijection on 0..{n}")));
        }
    }
    Ok(())
}

/// A uniformly shuffled ordering of `0..n`, reproducible from `seed`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}
