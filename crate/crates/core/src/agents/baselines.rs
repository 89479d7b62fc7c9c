//! Non-learning reference policies: uniform random access, the belief-driven
//! Whittle heuristic and the genie that knows the switching pattern.

use rand::Rng;

use super::{AgentError, Policy, Result, SimRng};
use crate::env::{ActionSpace, ChannelAction, PatternSpec};

const TIE_EPS: f64 = 1e-12;

/// Uniform choice over all `C(N, k)` actions. With several users this is
/// slotted ALOHA.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    space: ActionSpace,
    last: Option<usize>,
}

impl RandomPolicy {
    pub fn new(num_channels: usize, k: usize) -> Result<Self> {
        Ok(Self {
            space: ActionSpace::new(num_channels, k)?,
            last: None,
        })
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&mut self, rng: &mut SimRng) -> Result<ChannelAction> {
        let index = rng.random_range(0..self.space.size());
        self.last = Some(index);
        Ok(self.space.unrank(index)?)
    }

    fn learn(&mut self, _reward: f64, _observation: &[f64], _rng: &mut SimRng) -> Result<()> {
        Ok(())
    }

    fn last_action_index(&self) -> Option<usize> {
        self.last
    }
}

/// Per-channel two-state model: `matrix[i][from][to]` with state 1 = usable,
/// and the current probability that each channel is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    matrices: Vec<[[f64; 2]; 2]>,
    beliefs: Vec<f64>,
}

impl BeliefState {
    /// Add-one smoothed transition counts from a probe log, `log[t][i]`
    /// being whether channel `i` was usable in slot `t`. Beliefs start at
    /// each channel's stationary usable probability.
    pub fn estimate(log: &[Vec<bool>]) -> Result<Self> {
        let n = log.first().map(Vec::len).ok_or(AgentError::EmptyLog)?;
        if n == 0 || log.iter().any(|row| row.len() != n) {
            return Err(AgentError::Config("probe log rows must share a non-zero width".into()));
        }
        let mut counts = vec![[[1.0f64; 2]; 2]; n];
        for pair in log.windows(2) {
            for (i, c) in counts.iter_mut().enumerate() {
                c[usize::from(pair[0][i])][usize::from(pair[1][i])] += 1.0;
            }
        }
        let matrices: Vec<[[f64; 2]; 2]> = counts
            .into_iter()
            .map(|c| c.map(|row| {
                let total = row[0] + row[1];
                [row[0] / total, row[1] / total]
            }))
            .collect();
        let beliefs = matrices
            .iter()
            .map(|m| {
                let (up, down) = (m[0][1], m[1][0]);
                up / (up + down)
            })
            .collect();
        Ok(Self { matrices, beliefs })
    }

    pub fn from_parts(matrices: Vec<[[f64; 2]; 2]>, beliefs: Vec<f64>) -> Result<Self> {
        let row_ok = |r: &[f64; 2]| r.iter().all(|v| (0.0..=1.0).contains(v)) && (r[0] + r[1] - 1.0).abs() < 1e-9;
        if matrices.len() != beliefs.len()
            || matrices.iter().any(|m| !m.iter().all(row_ok))
            || beliefs.iter().any(|b| !(0.0..=1.0).contains(b))
        {
            return Err(AgentError::Config("invalid belief state".into()));
        }
        Ok(Self { matrices, beliefs })
    }

    pub fn num_channels(&self) -> usize {
        self.beliefs.len()
    }

    pub fn matrix(&self, channel: usize) -> [[f64; 2]; 2] {
        self.matrices[channel]
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    /// The `k` channels with the largest beliefs, lowest index on ties.
    pub fn select(&self, k: usize) -> Result<ChannelAction> {
        let n = self.num_channels();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.beliefs[b].total_cmp(&self.beliefs[a]).then(a.cmp(&b)));
        order.truncate(k);
        Ok(ChannelAction::new(order, n)?)
    }

    /// Snaps observed channels to their realized state, then propagates
    /// every channel one step through its matrix.
    pub fn update(&mut self, observed: &[(usize, bool)]) {
        for &(i, usable) in observed {
            self.beliefs[i] = if usable { 1.0 } else { 0.0 };
        }
        for (b, m) in self.beliefs.iter_mut().zip(&self.matrices) {
            *b = (*b * m[1][1] + (1.0 - *b) * m[0][1]).clamp(0.0, 1.0);
        }
    }
}

/// Myopic index policy on estimated per-channel beliefs.
#[derive(Debug, Clone)]
pub struct WhittlePolicy {
    belief: BeliefState,
    space: ActionSpace,
    last: Option<ChannelAction>,
}

impl WhittlePolicy {
    pub fn new(belief: BeliefState, k: usize) -> Result<Self> {
        let space = ActionSpace::new(belief.num_channels(), k)?;
        Ok(Self {
            belief,
            space,
            last: None,
        })
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }
}

impl Policy for WhittlePolicy {
    fn name(&self) -> &str {
        "whittle"
    }

    fn select(&mut self, _rng: &mut SimRng) -> Result<ChannelAction> {
        let action = self.belief.select(self.space.k())?;
        self.last = Some(action.clone());
        Ok(action)
    }

    fn learn(&mut self, _reward: f64, observation: &[f64], _rng: &mut SimRng) -> Result<()> {
        check_row(observation, self.space.num_channels())?;
        let action = self.last.as_ref().ok_or(AgentError::NotSelected)?;
        let seen: Vec<(usize, bool)> = action.channels().iter().map(|&c| (c, observation[c] > 0.0)).collect();
        self.belief.update(&seen);
        Ok(())
    }

    fn last_action_index(&self) -> Option<usize> {
        self.last.as_ref().and_then(|a| self.space.rank(a).ok())
    }
}

/// Knows the switching pattern and its advance probability and runs an exact
/// filter over pattern states from its own observations.
///
/// With one usable channel per state this is the stay/advance rule: after a
/// hit it moves to the next state's channel when `p > 0.5` and stays when
/// `p < 0.5`, and the reverse after a miss. Ties keep the previous channels.
#[derive(Debug, Clone)]
pub struct GeniePolicy {
    pattern: PatternSpec,
    space: ActionSpace,
    posterior: Vec<f64>,
    rank_offset: usize,
    last: Option<ChannelAction>,
}

impl GeniePolicy {
    pub fn new(pattern: PatternSpec, k: usize) -> Result<Self> {
        let space = ActionSpace::new(pattern.num_channels(), k)?;
        let m = pattern.num_states();
        Ok(Self {
            posterior: vec![1.0 / m as f64; m],
            pattern,
            space,
            rank_offset: 0,
            last: None,
        })
    }

    /// Skips the `offset` best-ranked channels, so several genies can split
    /// the usable set instead of colliding.
    pub fn with_rank_offset(mut self, offset: usize) -> Result<Self> {
        if offset + self.space.k() > self.space.num_channels() {
            return Err(AgentError::Config(format!(
                "rank offset {offset} leaves fewer than {} channels",
                self.space.k()
            )));
        }
        self.rank_offset = offset;
        Ok(self)
    }

    /// Starts the filter from a known state instead of the uniform prior.
    pub fn with_known_state(mut self, state: usize) -> Self {
        self.posterior.fill(0.0);
        let m = self.posterior.len();
        self.posterior[state % m] = 1.0;
        self
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }

    /// Expected base reward of each channel under the current posterior.
    pub fn channel_scores(&self) -> Vec<f64> {
        let mut scores = vec![0.0; self.space.num_channels()];
        for (s, &w) in self.posterior.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (sc, cond) in scores.iter_mut().zip(self.pattern.state(s)) {
                *sc += w * cond.base_reward();
            }
        }
        scores
    }

    fn rank_channels(&self) -> Vec<usize> {
        let scores = self.channel_scores();
        let kept = |c: usize| self.last.as_ref().is_some_and(|a| a.contains(c));
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (scores[a], scores[b]);
            if (sa - sb).abs() > TIE_EPS {
                sb.total_cmp(&sa)
            } else {
                kept(b).cmp(&kept(a)).then(a.cmp(&b))
            }
        });
        order
    }

    fn filter(&mut self, action: &ChannelAction, observation: &[f64]) {
        let prior = self.posterior.clone();
        for (s, w) in self.posterior.iter_mut().enumerate() {
            let state = self.pattern.state(s);
            let consistent = action
                .channels()
                .iter()
                .all(|&c| state[c].is_usable() == (observation[c] > 0.0));
            if !consistent {
                *w = 0.0;
            }
        }
        let total: f64 = self.posterior.iter().sum();
        if total > 0.0 {
            self.posterior.iter_mut().for_each(|w| *w /= total);
        } else {
            // the observation fits no state (e.g. a collision masked the channel)
            self.posterior = prior;
        }
        let p = self.pattern.switch_prob();
        let m = self.posterior.len();
        let filtered = self.posterior.clone();
        for s in 0..m {
            self.posterior[s] = (1.0 - p) * filtered[s] + p * filtered[(s + m - 1) % m];
        }
    }
}

impl Policy for GeniePolicy {
    fn name(&self) -> &str {
        "genie"
    }

    fn select(&mut self, _rng: &mut SimRng) -> Result<ChannelAction> {
        let order = self.rank_channels();
        let picked = order[self.rank_offset..self.rank_offset + self.space.k()].to_vec();
        let action = ChannelAction::new(picked, self.space.num_channels())?;
        self.last = Some(action.clone());
        Ok(action)
    }

    fn learn(&mut self, _reward: f64, observation: &[f64], _rng: &mut SimRng) -> Result<()> {
        check_row(observation, self.space.num_channels())?;
        let action = self.last.clone().ok_or(AgentError::NotSelected)?;
        self.filter(&action, observation);
        Ok(())
    }

    fn last_action_index(&self) -> Option<usize> {
        self.last.as_ref().and_then(|a| self.space.rank(a).ok())
    }
}

fn check_row(observation: &[f64], n: usize) -> Result<()> {
    if observation.len() != n {
        return Err(AgentError::ObservationDim {
            expected: n,
            got: observation.len(),
        });
    }
    Ok(())
}
