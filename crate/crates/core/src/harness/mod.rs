//! Experiment configuration, the slot loop, metrics and output files.

mod config;
mod metrics;
mod ops;
mod output;
mod run;
mod sweep;

pub use config::{ChangeSpec, ExperimentConfig, PatternSource, PolicyKind, UserSpec};
pub use metrics::{collision_probability, MetricsLog};
pub use ops::{default_op_counts, measure_decision_time, op_counts, OpCounts};
pub use output::{export_csv, render_svg, reward_series, svg_chart, write_csv, Series, CSV_HEADER};
pub use run::{build_policies, derive_seed, probe_log, replica_seeds, run, run_replicas};
pub use sweep::{summarize, sweep_switch_prob, write_summary, SummaryRow};

use std::path::Path;

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("slot order violated: expected slot {expected}, found {found}")]
    PhaseOrder { expected: u64, found: u64 },
    #[error("range {start}..{end} is empty or exceeds the {len} logged slots")]
    EmptyRange { start: usize, end: usize, len: usize },
    #[error("no user {0} in this log")]
    UnknownUser(usize),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }

    /// Process exit code: 1 for configuration problems, 2 for everything
    /// that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Env(e) if e.is_config() => 1,
            HarnessError::Agent(AgentError::Config(_)) => 1,
            HarnessError::Agent(AgentError::Env(e)) if e.is_config() => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
