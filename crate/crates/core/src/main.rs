use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcaccess::agents::{AcConfig, DqnConfig};
use mcaccess::harness::{
    self, default_op_counts, export_csv, measure_decision_time, render_svg, replica_seeds, reward_series,
    summarize, sweep_switch_prob, write_summary, ExperimentConfig, HarnessError, PolicyKind, Series, SummaryRow,
};

#[derive(Parser)]
#[command(name = "mcaccess", version, about = "Multichannel access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config, optionally as several seeded replicas.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
    },
    /// Re-run a config over a list of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "switch_prob")]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
    },
    /// Wall-clock time per decision of the actor-critic and DQN agents.
    BenchRuntime {
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        channels: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        warmup: usize,
        #[arg(long, default_value_t = 32)]
        minibatch: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Neuron-level operation counts of one decision.
    Opcount {
        #[arg(long, default_value_t = 32)]
        minibatch: u64,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        channels: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> harness::Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            replicas,
        } => cmd_run(&config, &out, seed, replicas),
        Command::Sweep {
            config,
            param,
            values,
            out,
            seed,
            replicas,
        } => cmd_sweep(&config, &param, &values, &out, seed, replicas),
        Command::BenchRuntime {
            channels,
            trials,
            warmup,
            minibatch,
            seed,
        } => cmd_bench(&channels, trials, warmup, minibatch, seed),
        Command::Opcount { minibatch, channels } => cmd_opcount(minibatch, &channels),
    }
}

fn prepare(config: &Path, out: &Path, replicas: usize) -> harness::Result<ExperimentConfig> {
    if replicas == 0 {
        return Err(HarnessError::Config("--replicas must be at least 1".into()));
    }
    let cfg = ExperimentConfig::load(config)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::Io {
        path: out.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>, replicas: usize) -> harness::Result<()> {
    let cfg = prepare(config, out, replicas)?;
    let seeds = replica_seeds(seed.unwrap_or(cfg.seed), replicas);
    let logs = harness::run_replicas(&cfg, &seeds)?;
    let p = cfg.pattern.build(None)?.switch_prob();
    let mut rows: Vec<SummaryRow> = Vec::new();
    for (log, &s) in logs.iter().zip(&seeds) {
        export_csv(log, &out.join(format!("run_seed{s}.csv")))?;
        let title = cfg.name.clone().unwrap_or_else(|| "average reward".into());
        render_svg(
            &reward_series(log),
            &format!("{title} (seed {s})"),
            "slot",
            &format!("reward averaged over {} slots", cfg.window),
            cfg.window as f64,
            &out.join(format!("rewards_seed{s}.svg")),
        )?;
        let mut seeded = cfg.clone();
        seeded.seed = s;
        rows.extend(summarize(&seeded, p, log)?);
    }
    write_summary(&rows, &out.join("summary.csv"))?;
    print_rows(&rows);
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    param: &str,
    values: &[f64],
    out: &Path,
    seed: Option<u64>,
    replicas: usize,
) -> harness::Result<()> {
    if param != "switch_prob" {
        return Err(HarnessError::Config(format!("unsupported sweep parameter `{param}` (only switch_prob)")));
    }
    let cfg = prepare(config, out, replicas)?;
    let seeds = replica_seeds(seed.unwrap_or(cfg.seed), replicas);
    let rows = sweep_switch_prob(&cfg, values, &seeds)?;
    write_summary(&rows, &out.join("summary.csv"))?;

    let users = cfg.users.len();
    let series: Vec<Series> = (0..users)
        .map(|u| {
            let means = values
                .iter()
                .map(|&v| {
                    let hits: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.user == u && r.switch_prob == v)
                        .map(|r| r.eval_avg)
                        .collect();
                    hits.iter().sum::<f64>() / hits.len() as f64
                })
                .collect();
            Series::new(cfg.users[u].label(u), means)
        })
        .collect();
    let step = if values.len() > 1 { values[1] - values[0] } else { 1.0 };
    render_svg(
        &series,
        "average reward vs switching probability",
        &format!("switching probability index (from {}, step {step})", values[0]),
        "average reward",
        1.0,
        &out.join("sweep.svg"),
    )?;
    print_rows(&rows);
    Ok(())
}

fn print_rows(rows: &[SummaryRow]) {
    println!("{:>6} {:>6} {:>4} {:<12} {:>9} {:>9} {:>9} {:>9}", "p", "seed", "user", "name", "eval", "full", "collide", "bad");
    for r in rows {
        println!(
            "{:>6} {:>6} {:>4} {:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            r.switch_prob, r.seed, r.user, r.name, r.eval_avg, r.full_avg, r.collision, r.bad
        );
    }
}

fn cmd_bench(channels: &[usize], trials: usize, warmup: usize, minibatch: usize, seed: u64) -> harness::Result<()> {
    let ac = AcConfig::default();
    let dqn = DqnConfig {
        batch: minibatch,
        ..DqnConfig::default()
    };
    println!("{:>4} {:>12} {:>12} {:>10}", "N", "ac_s", "dqn_s", "reduction%");
    for &n in channels {
        let t_ac = measure_decision_time(PolicyKind::Ac, n, &ac, &dqn, warmup, trials, seed)?;
        let t_dqn = measure_decision_time(PolicyKind::Dqn, n, &ac, &dqn, warmup, trials, seed)?;
        println!("{n:>4} {t_ac:>12.6} {t_dqn:>12.6} {:>10.2}", 100.0 * (1.0 - t_ac / t_dqn));
    }
    Ok(())
}

fn cmd_opcount(minibatch: u64, channels: &[usize]) -> harness::Result<()> {
    println!("{:>4} {:>12} {:>14} {:>10} {:>10}", "N", "ac_ops", "dqn_ops", "ratio", "3/M");
    for &n in channels {
        let c = default_op_counts(n, minibatch)?;
        println!(
            "{n:>4} {:>12} {:>14} {:>10.5} {:>10.5}",
            c.ac,
            c.dqn,
            c.ratio,
            3.0 / minibatch as f64
        );
    }
    Ok(())
}
