use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{collision_probability, MetricsLog};
use super::run::run;
use super::{HarnessError, Result};
use crate::env::OutcomeLabel;

/// Headline numbers of one user in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub switch_prob: f64,
    pub seed: u64,
    pub user: usize,
    pub name: String,
    pub eval_avg: f64,
    pub full_avg: f64,
    pub collision: f64,
    pub bad: f64,
}

pub fn summarize(config: &ExperimentConfig, switch_prob: f64, log: &MetricsLog) -> Result<Vec<SummaryRow>> {
    let eval = config.eval_start() as usize..log.num_slots();
    (0..log.num_users())
        .map(|u| {
            let dist = log.outcome_distribution(u, eval.clone())?;
            Ok(SummaryRow {
                switch_prob,
                seed: config.seed,
                user: u,
                name: log.user_names()[u].clone(),
                eval_avg: log.user_average_reward(u, eval.clone())?,
                full_avg: log.user_average_reward(u, log.full_range())?,
                collision: collision_probability(&dist),
                bad: dist[OutcomeLabel::Bad.index()],
            })
        })
        .collect()
}

/// Runs `config` for every switching probability and seed, in parallel.
pub fn sweep_switch_prob(config: &ExperimentConfig, values: &[f64], seeds: &[u64]) -> Result<Vec<SummaryRow>> {
    if values.is_empty() || seeds.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value and one seed".into()));
    }
    let mut jobs = Vec::new();
    for &p in values {
        for &seed in seeds {
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.pattern = cfg.pattern.with_switch_prob(p)?;
            if let Some(change) = &mut cfg.change {
                change.pattern = change.pattern.with_switch_prob(p)?;
            }
            jobs.push((p, cfg));
        }
    }
    let per_job: Vec<Vec<SummaryRow>> = jobs
        .par_iter()
        .map(|(p, cfg)| summarize(cfg, *p, &run(cfg)?))
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

pub const SUMMARY_HEADER: &str = "switch_prob,seed,user,name,eval_avg,full_avg,collision,bad";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.switch_prob, r.seed, r.user, r.name, r.eval_avg, r.full_avg, r.collision, r.bad
        );
    }
    s
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    std::fs::write(path, summary_csv(rows)).map_err(|e| HarnessError::io(path, e))
}
