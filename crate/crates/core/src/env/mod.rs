//! Correlated Markov channels and the slot resolver.

mod action;
mod dynamics;
mod pattern;

pub use action::{binomial, ActionSpace, ChannelAction};
pub use dynamics::{CollisionDiscount, EnvState, OutcomeLabel, RewardMode, StepOutcome, StepRules};
pub use pattern::{random_permutation, ChannelCondition, PatternSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid pattern: {0}")]
    Pattern(String),
    #[error("invalid action: {0}")]
    Action(String),
    #[error("action space C({n},{k}) is invalid (need 1 <= k < n)")]
    ActionSpace { n: usize, k: usize },
    #[error("action index {index} out of range for {size} actions")]
    ActionIndex { index: usize, size: usize },
    #[error("step called with no users")]
    NoUsers,
    #[error("reward mode {mode:?} does not accept {detail}")]
    Mode { mode: RewardMode, detail: String },
    #[error("unknown user {0}")]
    UnknownUser(usize),
    #[error("pattern has {got} channels, environment has {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T, E = EnvError> = std::result::Result<T, E>;

impl EnvError {
    /// Errors that stem from a bad pattern or setup rather than from a slot
    /// in progress.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            EnvError::Pattern(_)
                | EnvError::ActionSpace { .. }
                | EnvError::Mode { .. }
                | EnvError::ChannelMismatch { .. }
                | EnvError::Io { .. }
        )
    }
}
