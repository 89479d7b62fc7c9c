use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelAction, ChannelCondition, EnvError, PatternSpec, Result};

/// How simultaneous accesses are rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// One user, no collisions possible.
    SingleUser,
    /// Users sharing a usable channel split it by the collision discount.
    MultiShare,
    /// As `MultiShare`, with the primary user's rewards doubled.
    MultiPrimaryShare,
    /// The primary user keeps a contested channel to itself (reward doubled,
    /// undiscounted); secondaries that collide with it get the bad-channel
    /// reward.
    MultiPrimaryExclusive,
}

impl RewardMode {
    pub fn has_primary(self) -> bool {
        matches!(self, RewardMode::MultiPrimaryShare | RewardMode::MultiPrimaryExclusive)
    }
}

/// Discount applied to a usable channel accessed by `m >= 2` users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollisionDiscount {
    /// `1 / m`
    #[default]
    Inverse,
    /// `1 / (m - 1)`; equals 1 for two users.
    InverseOthers,
    /// `c / m`
    Scaled(f64),
    Constant(f64),
}

impl CollisionDiscount {
    pub fn factor(self, occupancy: usize) -> f64 {
        debug_assert!(occupancy >= 2);
        match self {
            CollisionDiscount::Inverse => 1.0 / occupancy as f64,
            CollisionDiscount::InverseOthers => 1.0 / (occupancy - 1) as f64,
            CollisionDiscount::Scaled(c) => c / occupancy as f64,
            CollisionDiscount::Constant(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    ExcellentAlone,
    CollisionExcellent,
    GoodAlone,
    CollisionGood,
    CollisionWithPrimary,
    CollisionWithSecondary,
    Bad,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 7] = [
        OutcomeLabel::ExcellentAlone,
        OutcomeLabel::CollisionExcellent,
        OutcomeLabel::GoodAlone,
        OutcomeLabel::CollisionGood,
        OutcomeLabel::CollisionWithPrimary,
        OutcomeLabel::CollisionWithSecondary,
        OutcomeLabel::Bad,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::ExcellentAlone => "excellent",
            OutcomeLabel::CollisionExcellent => "collision_excellent",
            OutcomeLabel::GoodAlone => "good",
            OutcomeLabel::CollisionGood => "collision_good",
            OutcomeLabel::CollisionWithPrimary => "collision_with_primary",
            OutcomeLabel::CollisionWithSecondary => "collision_with_secondary",
            OutcomeLabel::Bad => "bad",
        }
    }

    pub fn is_collision(self) -> bool {
        matches!(
            self,
            OutcomeLabel::CollisionExcellent
                | OutcomeLabel::CollisionGood
                | OutcomeLabel::CollisionWithPrimary
                | OutcomeLabel::CollisionWithSecondary
        )
    }
}

/// Reward rules for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRules {
    pub mode: RewardMode,
    pub primary: Option<usize>,
    pub discount: CollisionDiscount,
}

impl StepRules {
    pub fn single_user() -> Self {
        Self {
            mode: RewardMode::SingleUser,
            primary: None,
            discount: CollisionDiscount::Inverse,
        }
    }

    pub fn share() -> Self {
        Self {
            mode: RewardMode::MultiShare,
            ..Self::single_user()
        }
    }

    pub fn with_primary(mode: RewardMode, primary: usize) -> Self {
        Self {
            mode,
            primary: Some(primary),
            discount: CollisionDiscount::Inverse,
        }
    }
}

/// Everything realized in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Slot index the outcome belongs to.
    pub slot: u64,
    /// Pattern state that was active during the slot.
    pub state_index: usize,
    pub per_user_reward: Vec<f64>,
    /// Per user, the realized value at each selected channel and 0 elsewhere.
    pub per_user_observation: Vec<Vec<f64>>,
    pub occupancy: Vec<usize>,
    /// Per user, one label per selected channel in ascending channel order.
    pub labels: Vec<Vec<OutcomeLabel>>,
}

impl StepOutcome {
    pub fn observe(&self, user: usize) -> Result<&[f64]> {
        self.per_user_observation
            .get(user)
            .map(Vec::as_slice)
            .ok_or(EnvError::UnknownUser(user))
    }

    pub fn num_users(&self) -> usize {
        self.per_user_reward.len()
    }
}

/// The live chain: current pattern, state and slot counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pattern: PatternSpec,
    state_index: usize,
    slot: u64,
}

impl EnvState {
    pub fn new(pattern: PatternSpec) -> Self {
        Self {
            pattern,
            state_index: 0,
            slot: 0,
        }
    }

    pub fn with_state_index(pattern: PatternSpec, state_index: usize) -> Result<Self> {
        if state_index >= pattern.num_states() {
            return Err(EnvError::Pattern(format!(
                "state index {state_index} out of range for {} states",
                pattern.num_states()
            )));
        }
        Ok(Self {
            pattern,
            state_index,
            slot: 0,
        })
    }

    pub fn pattern(&self) -> &PatternSpec {
        &self.pattern
    }

    pub fn state_index(&self) -> usize {
        self.state_index
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn num_channels(&self) -> usize {
        self.pattern.num_channels()
    }

    pub fn conditions(&self) -> &[ChannelCondition] {
        self.pattern.state(self.state_index)
    }

    /// Swaps in a new pattern with the same channel count. The state index
    /// is kept (wrapped into range); users are not told.
    pub fn replace_pattern(&mut self, pattern: PatternSpec) -> Result<()> {
        if pattern.num_channels() != self.num_channels() {
            return Err(EnvError::ChannelMismatch {
                expected: self.num_channels(),
                got: pattern.num_channels(),
            });
        }
        self.state_index %= pattern.num_states();
        self.pattern = pattern;
        Ok(())
    }

    /// Advances to the next pattern state with probability `switch_prob`;
    /// the slot counter always increments.
    pub fn transition<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if rng.random::<f64>() < self.pattern.switch_prob() {
            self.state_index = (self.state_index + 1) % self.pattern.num_states();
        }
        self.slot += 1;
    }

    /// Resolves one slot of simultaneous accesses, then transitions.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        actions: &[ChannelAction],
        rules: &StepRules,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let outcome = self.resolve(actions, rules)?;
        self.transition(rng);
        Ok(outcome)
    }

    /// Rewards, observations and labels for `actions` under the current
    /// state, without advancing the chain.
    pub fn resolve(&self, actions: &[ChannelAction], rules: &StepRules) -> Result<StepOutcome> {
        let n = self.num_channels();
        self.check(actions, rules)?;
        let mut occupancy = vec![0usize; n];
        for a in actions {
            for &c in a.channels() {
                occupancy[c] += 1;
            }
        }
        let primary = rules.primary;
        let primary_on = |c: usize| primary.is_some_and(|p| actions[p].contains(c));
        let conditions = self.conditions();

        let mut per_user_reward = Vec::with_capacity(actions.len());
        let mut per_user_observation = Vec::with_capacity(actions.len());
        let mut labels = Vec::with_capacity(actions.len());
        for (user, action) in actions.iter().enumerate() {
            let is_primary = primary == Some(user);
            let mut obs = vec![0.0; n];
            let mut user_labels = Vec::with_capacity(action.k());
            for &c in action.channels() {
                let cond = conditions[c];
                let m = occupancy[c];
                let excellent = cond == ChannelCondition::Excellent;
                let (mut value, label) = if !cond.is_usable() {
                    (cond.base_reward(), OutcomeLabel::Bad)
                } else if m == 1 {
                    let label = if excellent {
                        OutcomeLabel::ExcellentAlone
                    } else {
                        OutcomeLabel::GoodAlone
                    };
                    (cond.base_reward(), label)
                } else if rules.mode == RewardMode::MultiPrimaryExclusive {
                    if is_primary {
                        let label = if excellent {
                            OutcomeLabel::ExcellentAlone
                        } else {
                            OutcomeLabel::GoodAlone
                        };
                        (cond.base_reward(), label)
                    } else if primary_on(c) {
                        (ChannelCondition::Bad.base_reward(), OutcomeLabel::CollisionWithPrimary)
                    } else {
                        (
                            cond.base_reward() * rules.discount.factor(m),
                            OutcomeLabel::CollisionWithSecondary,
                        )
                    }
                } else {
                    let label = if excellent {
                        OutcomeLabel::CollisionExcellent
                    } else {
                        OutcomeLabel::CollisionGood
                    };
                    (cond.base_reward() * rules.discount.factor(m), label)
                };
                if is_primary {
                    value *= 2.0;
                }
                obs[c] = value;
                user_labels.push(label);
            }
            per_user_reward.push(action.channels().iter().map(|&c| obs[c]).sum());
            per_user_observation.push(obs);
            labels.push(user_labels);
        }
        Ok(StepOutcome {
            slot: self.slot,
            state_index: self.state_index,
            per_user_reward,
            per_user_observation,
            occupancy,
            labels,
        })
    }

    fn check(&self, actions: &[ChannelAction], rules: &StepRules) -> Result<()> {
        let n = self.num_channels();
        if actions.is_empty() {
            return Err(EnvError::NoUsers);
        }
        for a in actions {
            if a.k() >= n || a.channels().iter().any(|&c| c >= n) {
                return Err(EnvError::Action(format!(
                    "{:?} is not valid for {n} channels",
                    a.channels()
                )));
            }
        }
        let mode_err = |detail: String| EnvError::Mode {
            mode: rules.mode,
            detail,
        };
        if rules.mode == RewardMode::SingleUser && actions.len() != 1 {
            return Err(mode_err(format!("{} users", actions.len())));
        }
        match (rules.mode.has_primary(), rules.primary) {
            (true, None) => return Err(mode_err("a missing primary user".into())),
            (false, Some(p)) => return Err(mode_err(format!("primary user {p}"))),
            (true, Some(p)) if p >= actions.len() => return Err(EnvError::UnknownUser(p)),
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use ChannelCondition::{Bad as B, Excellent as E, Good as G};

    fn act(c: &[usize], n: usize) -> ChannelAction {
        ChannelAction::new(c.to_vec(), n).unwrap()
    }

    fn fixed(row: Vec<ChannelCondition>) -> EnvState {
        EnvState::new(PatternSpec::new(vec![row], 0.0, "fixed").unwrap())
    }

    #[test]
    fn degenerate_switch_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut stay = EnvState::new(PatternSpec::round_robin(5, 1, 0.0).unwrap());
        let mut go = EnvState::new(PatternSpec::round_robin(5, 1, 1.0).unwrap());
        for t in 1..=1000u64 {
            stay.transition(&mut rng);
            go.transition(&mut rng);
            assert_eq!(stay.state_index(), 0);
            assert_eq!(go.state_index(), (t % 5) as usize);
            assert_eq!(go.slot(), t);
        }
    }

    #[test]
    fn advance_frequency_within_three_sigma() {
        let p = 0.9;
        let t = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut env = EnvState::new(PatternSpec::round_robin(7, 1, p).unwrap());
        let mut advances = 0;
        for _ in 0..t {
            let before = env.state_index();
            env.transition(&mut rng);
            advances += usize::from(env.state_index() != before);
        }
        let freq = advances as f64 / t as f64;
        assert!((0.894..=0.906).contains(&freq), "{freq}");
    }

    #[test]
    fn single_user_good_channel() {
        let mut env = fixed(vec![B, G, B, B]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = env.step(&[act(&[1], 4)], &StepRules::single_user(), &mut rng).unwrap();
        assert_eq!(out.per_user_reward, vec![1.0]);
        assert_eq!(out.observe(0).unwrap(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(out.labels[0], vec![OutcomeLabel::GoodAlone]);
        assert_eq!(env.slot(), 1);
    }

    #[test]
    fn observation_of_bad_channel() {
        let env = fixed(vec![G, B, B, B, B]);
        let out = env.resolve(&[act(&[3], 5)], &StepRules::single_user()).unwrap();
        assert_eq!(out.observe(0).unwrap(), &[0.0, 0.0, 0.0, -1.0, 0.0]);
        assert_eq!(out.observe(1).unwrap_err(), EnvError::UnknownUser(1));
    }

    #[test]
    fn shared_good_channel_is_halved() {
        let env = fixed(vec![G, B, B]);
        let out = env.resolve(&[act(&[0], 3), act(&[0], 3)], &StepRules::share()).unwrap();
        assert_eq!(out.per_user_reward, vec![0.5, 0.5]);
        assert_eq!(out.occupancy, vec![2, 0, 0]);
        assert_eq!(out.observe(1).unwrap(), &[0.5, 0.0, 0.0]);
        assert!(out.labels.iter().all(|l| l == &[OutcomeLabel::CollisionGood]));
    }

    #[test]
    fn exclusive_primary_keeps_excellent_channel() {
        let env = fixed(vec![E, G, B, B]);
        let rules = StepRules::with_primary(RewardMode::MultiPrimaryExclusive, 0);
        let out = env.resolve(&[act(&[0], 4), act(&[0], 4)], &rules).unwrap();
        assert_eq!(out.per_user_reward, vec![4.0, -1.0]);
        assert_eq!(out.labels[0], vec![OutcomeLabel::ExcellentAlone]);
        assert_eq!(out.labels[1], vec![OutcomeLabel::CollisionWithPrimary]);
    }

    #[test]
    fn exclusive_secondaries_share_among_themselves() {
        let env = fixed(vec![E, G, B, B]);
        let rules = StepRules::with_primary(RewardMode::MultiPrimaryExclusive, 0);
        let out = env.resolve(&[act(&[3], 4), act(&[1], 4), act(&[1], 4)], &rules).unwrap();
        assert_eq!(out.per_user_reward, vec![-2.0, 0.5, 0.5]);
        assert_eq!(out.labels[0], vec![OutcomeLabel::Bad]);
        assert_eq!(out.labels[1], vec![OutcomeLabel::CollisionWithSecondary]);
    }

    #[test]
    fn primary_share_doubles_primary_only() {
        let env = fixed(vec![E, G, B, B]);
        let rules = StepRules::with_primary(RewardMode::MultiPrimaryShare, 1);
        let out = env.resolve(&[act(&[0], 4), act(&[0], 4), act(&[1], 4)], &rules).unwrap();
        assert_eq!(out.per_user_reward, vec![1.0, 2.0, 1.0]);
        assert_eq!(out.labels[0], vec![OutcomeLabel::CollisionExcellent]);
        assert_eq!(out.labels[2], vec![OutcomeLabel::GoodAlone]);
    }

    #[test]
    fn multi_channel_reward_is_sum_of_observation() {
        let env = fixed(vec![G, B, E, G, B]);
        let out = env.resolve(&[act(&[0, 1, 2], 5), act(&[2, 3], 5)], &StepRules::share()).unwrap();
        assert_eq!(out.per_user_reward, vec![1.0 - 1.0 + 1.0, 1.0 + 1.0]);
        assert_eq!(out.occupancy.iter().sum::<usize>(), 5);
        assert_eq!(
            out.labels[0],
            vec![OutcomeLabel::GoodAlone, OutcomeLabel::Bad, OutcomeLabel::CollisionExcellent]
        );
    }

    #[test]
    fn discount_variants() {
        assert_eq!(CollisionDiscount::Inverse.factor(4), 0.25);
        assert_eq!(CollisionDiscount::InverseOthers.factor(3), 0.5);
        assert_eq!(CollisionDiscount::Constant(0.3).factor(2), 0.3);
        let env = fixed(vec![G, B, B]);
        let rules = StepRules {
            discount: CollisionDiscount::InverseOthers,
            ..StepRules::share()
        };
        let out = env.resolve(&[act(&[0], 3), act(&[0], 3), act(&[0], 3)], &rules).unwrap();
        assert_eq!(out.per_user_reward, vec![0.5; 3]);
    }

    #[test]
    fn rule_validation() {
        let env = fixed(vec![G, B, B]);
        assert_eq!(env.resolve(&[], &StepRules::share()).unwrap_err(), EnvError::NoUsers);
        assert!(env
            .resolve(&[act(&[0], 3), act(&[1], 3)], &StepRules::single_user())
            .is_err());
        let missing = StepRules {
            mode: RewardMode::MultiPrimaryShare,
            ..StepRules::share()
        };
        assert!(env.resolve(&[act(&[0], 3)], &missing).is_err());
        let stray = StepRules {
            primary: Some(0),
            ..StepRules::share()
        };
        assert!(env.resolve(&[act(&[0], 3)], &stray).is_err());
        let out_of_range = StepRules::with_primary(RewardMode::MultiPrimaryShare, 2);
        assert_eq!(
            env.resolve(&[act(&[0], 3), act(&[1], 3)], &out_of_range).unwrap_err(),
            EnvError::UnknownUser(2)
        );
        assert!(env.resolve(&[act(&[4], 5)], &StepRules::single_user()).is_err());
    }

    #[test]
    fn replace_pattern_keeps_channel_count() {
        let mut env = EnvState::new(PatternSpec::round_robin(4, 1, 0.5).unwrap());
        assert!(env.replace_pattern(PatternSpec::round_robin(5, 1, 0.5).unwrap()).is_err());
        env.replace_pattern(PatternSpec::permutation(4, 1, 0.5, &[3, 2, 1, 0]).unwrap())
            .unwrap();
        assert_eq!(env.conditions(), &[B, B, B, G]);
    }
}
