//! Dynamic multichannel access over correlated Markov channels.
//!
//! The crate is split into four layers:
//!
//! - [`env`]: channel-state switching patterns, the Markov chain that drives
//!   them, and the slot resolver that turns joint user actions into rewards,
//!   observations and outcome labels.
//! - [`numerics`]: a small dense MLP with the two update rules an actor-critic
//!   learner needs (squared TD error for the critic, TD-weighted log-probability
//!   ascent for the actor) plus finite-difference gradient checking.
//! - [`agents`]: the actor-critic agent and its baselines (DQN with replay,
//!   random access, a belief-driven Whittle heuristic, and a genie with known
//!   dynamics).
//! - [`harness`]: experiment configuration, the slot loop, metrics, runtime
//!   measurement, CSV/SVG output and the `mcaccess` command line.

pub mod agents;
pub mod env;
pub mod harness;
pub mod numerics;


pub use agents::{AcAgent, AcConfig, DqnAgent, DqnConfig, Policy};
pub use env::{ChannelAction, ChannelCondition, EnvState, PatternSpec, RewardMode, StepOutcome};
pub use numerics::{Activation, ForwardTrace, Mlp};
