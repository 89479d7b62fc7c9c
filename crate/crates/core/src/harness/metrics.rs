use std::ops::Range;

use super::{HarnessError, Result};
use crate::env::OutcomeLabel;

/// Everything recorded during a run, one entry per (slot, user).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    users: Vec<String>,
    ks: Vec<usize>,
    label_offsets: Vec<usize>,
    labels_per_slot: usize,
    window: usize,
    rewards: Vec<f64>,
    labels: Vec<OutcomeLabel>,
    actions: Vec<Option<u32>>,
    states: Vec<u32>,
    timings: Option<Vec<f64>>,
    lr_trace: Vec<Vec<Option<f64>>>,
    change_slot: Option<u64>,
}

impl MetricsLog {
    pub fn new(users: Vec<String>, ks: Vec<usize>, window: usize, record_timings: bool) -> Self {
        assert_eq!(users.len(), ks.len());
        assert!(window > 0);
        let mut label_offsets = Vec::with_capacity(ks.len());
        let mut acc = 0;
        for &k in &ks {
            label_offsets.push(acc);
            acc += k;
        }
        Self {
            users,
            ks,
            label_offsets,
            labels_per_slot: acc,
            window,
            rewards: Vec::new(),
            labels: Vec::new(),
            actions: Vec::new(),
            states: Vec::new(),
            timings: record_timings.then(Vec::new),
            lr_trace: Vec::new(),
            change_slot: None,
        }
    }

    pub fn reserve(&mut self, slots: usize) {
        let u = self.num_users();
        self.rewards.reserve(slots * u);
        self.actions.reserve(slots * u);
        self.labels.reserve(slots * self.labels_per_slot);
        self.states.reserve(slots);
        if let Some(t) = &mut self.timings {
            t.reserve(slots * u);
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn user_names(&self) -> &[String] {
        &self.users
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn num_slots(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn change_slot(&self) -> Option<u64> {
        self.change_slot
    }

    pub(crate) fn set_change_slot(&mut self, slot: u64) {
        self.change_slot = Some(slot);
    }

    /// Appends one slot. `labels[u]` holds user `u`'s per-channel labels.
    pub fn push_slot(
        &mut self,
        state: usize,
        rewards: &[f64],
        labels: &[Vec<OutcomeLabel>],
        actions: &[Option<usize>],
        timings: Option<&[f64]>,
    ) {
        let u = self.num_users();
        assert!(rewards.len() == u && labels.len() == u && actions.len() == u);
        self.states.push(state as u32);
        self.rewards.extend_from_slice(rewards);
        for (l, &k) in labels.iter().zip(&self.ks) {
            assert_eq!(l.len(), k, "label count must equal k");
            self.labels.extend_from_slice(l);
        }
        self.actions.extend(actions.iter().map(|a| a.map(|i| i as u32)));
        if let (Some(store), Some(t)) = (&mut self.timings, timings) {
            store.extend_from_slice(t);
        }
    }

    pub(crate) fn push_learning_rates(&mut self, rates: Vec<Option<f64>>) {
        self.lr_trace.push(rates);
    }

    /// Learning rate of each user at the end of every completed window.
    pub fn learning_rate_trace(&self) -> &[Vec<Option<f64>>] {
        &self.lr_trace
    }

    pub fn reward(&self, slot: usize, user: usize) -> f64 {
        self.rewards[slot * self.num_users() + user]
    }

    pub fn labels(&self, slot: usize, user: usize) -> &[OutcomeLabel] {
        let start = slot * self.labels_per_slot + self.label_offsets[user];
        &self.labels[start..start + self.ks[user]]
    }

    pub fn action_index(&self, slot: usize, user: usize) -> Option<usize> {
        self.actions[slot * self.num_users() + user].map(|a| a as usize)
    }

    pub fn state_index(&self, slot: usize) -> usize {
        self.states[slot] as usize
    }

    /// Wall-clock seconds spent in select plus learn, when recorded.
    pub fn timing(&self, slot: usize, user: usize) -> Option<f64> {
        self.timings.as_ref().map(|t| t[slot * self.num_users() + user])
    }

    fn check_range(&self, range: &Range<usize>) -> Result<()> {
        if range.is_empty() || range.end > self.num_slots() {
            return Err(HarnessError::EmptyRange {
                start: range.start,
                end: range.end,
                len: self.num_slots(),
            });
        }
        Ok(())
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.num_users() {
            return Err(HarnessError::UnknownUser(user));
        }
        Ok(())
    }

    /// Mean over the slots in `range` of the reward summed over users.
    pub fn average_reward(&self, range: Range<usize>) -> Result<f64> {
        self.check_range(&range)?;
        let u = self.num_users();
        let total: f64 = self.rewards[range.start * u..range.end * u].iter().sum();
        Ok(total / range.len() as f64)
    }

    /// Mean reward of one user over `range`.
    pub fn user_average_reward(&self, user: usize, range: Range<usize>) -> Result<f64> {
        self.check_range(&range)?;
        self.check_user(user)?;
        let total: f64 = range.clone().map(|t| self.reward(t, user)).sum();
        Ok(total / range.len() as f64)
    }

    pub fn full_range(&self) -> Range<usize> {
        0..self.num_slots()
    }

    /// The last `fraction` of the logged slots (at least one).
    pub fn tail_range(&self, fraction: f64) -> Range<usize> {
        let n = self.num_slots();
        let len = ((n as f64 * fraction).round() as usize).clamp(1.min(n), n);
        n - len..n
    }

    /// Aligned windows of `window` slots; the last one may be shorter.
    pub fn window_ranges(&self) -> Vec<Range<usize>> {
        let n = self.num_slots();
        (0..n.div_ceil(self.window))
            .map(|w| w * self.window..((w + 1) * self.window).min(n))
            .collect()
    }

    /// Per-window mean of one user's reward, or of the user sum for `None`.
    pub fn window_averages(&self, user: Option<usize>) -> Result<Vec<f64>> {
        if let Some(u) = user {
            self.check_user(u)?;
        }
        self.window_ranges()
            .into_iter()
            .map(|r| match user {
                Some(u) => self.user_average_reward(u, r),
                None => self.average_reward(r),
            })
            .collect()
    }

    /// Empirical frequency of each label over the user's accessed channels
    /// in `range`, in [`OutcomeLabel::ALL`] order.
    pub fn outcome_distribution(&self, user: usize, range: Range<usize>) -> Result<[f64; 7]> {
        self.check_user(user)?;
        self.check_range(&range)?;
        let mut counts = [0usize; 7];
        for t in range {
            for l in self.labels(t, user) {
                counts[l.index()] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        Ok(counts.map(|c| c as f64 / total as f64))
    }

    /// Mean wall-clock time per decision of one user over `range`.
    pub fn mean_decision_time(&self, user: usize, range: Range<usize>) -> Result<Option<f64>> {
        self.check_user(user)?;
        self.check_range(&range)?;
        Ok(self.timings.as_ref().map(|_| {
            let total: f64 = range.clone().filter_map(|t| self.timing(t, user)).sum();
            total / range.len() as f64
        }))
    }
}

/// Probability mass of the collision labels in a distribution row.
pub fn collision_probability(dist: &[f64; 7]) -> f64 {
    OutcomeLabel::ALL
        .iter()
        .filter(|l| l.is_collision())
        .map(|l| dist[l.index()])
        .sum()
}
