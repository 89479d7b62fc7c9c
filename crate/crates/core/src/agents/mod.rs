//! Channel-access policies.
//!
//! Every policy follows the same two-phase slot protocol: [`Policy::select`]
//! picks the channels for the current slot, then [`Policy::learn`] receives
//! the realized reward and the user's observation row for that slot.

mod actor_critic;
mod baselines;
mod dqn;
mod stack;

pub use actor_critic::{td_error, AcAgent, AcConfig, SelectMode};
pub use baselines::{BeliefState, GeniePolicy, RandomPolicy, WhittlePolicy};
pub use dqn::{DqnAgent, DqnConfig, ReplayBuffer, SparseVec, Transition};
pub use stack::ObservationStack;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{ChannelAction, EnvError};
use crate::numerics::NnError;

/// Generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("learn called without a preceding select in this slot")]
    NotSelected,
    #[error("observation has {got} entries, expected {expected}")]
    ObservationDim { expected: usize, got: usize },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("probing log is empty")]
    EmptyLog,
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

/// A decision policy for one user.
pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Chooses the channels to access in the current slot.
    fn select(&mut self, rng: &mut SimRng) -> Result<ChannelAction>;

    /// Feedback for the slot most recently selected: the user's total reward
    /// and its length-N observation row.
    fn learn(&mut self, reward: f64, observation: &[f64], rng: &mut SimRng) -> Result<()>;

    /// Action-space index of the last selection, when the policy has one.
    fn last_action_index(&self) -> Option<usize> {
        None
    }

    /// Restores learning rates to their initial values.
    fn reset_learning_rates(&mut self) {}

    /// Current (actor) learning rate, for learning policies.
    fn learning_rate(&self) -> Option<f64> {
        None
    }
}
