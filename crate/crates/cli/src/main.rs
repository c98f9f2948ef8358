use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dqn_cli::commands::{self, EvalOptions};
use dqn_cli::config::{RawConfig, KEYS};
use dqn_core::env::EnvKind;
use dqn_core::proto::Endpoint;

#[derive(Parser)]
#[command(name = "dqn", version, about = "Train, evaluate and benchmark deep Q-networks on toy pixel games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable); wins over the file and DQN_* variables.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<dqn_cli::config::RunConfig> {
        Ok(RawConfig::load(self.config.as_deref(), &self.set)?.resolve()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the training loop, writing the learning curve and checkpoints to out_dir.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from a checkpoint (usually out_dir/latest.qnet).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint over eval_episodes games.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Per-episode scores CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Measure training throughput with both allocation modes, and evaluation throughput.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 5_000)]
        steps: u64,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Dump Q-values along a recorded trajectory.
    Probe {
        #[command(flatten)]
        cfg: ConfigArgs,
        checkpoint: PathBuf,
        trajectory: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Play one game and write its trajectory (random play without a checkpoint).
    Record {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Host a game for remote agents on unix:<path> or fifo:<dir>.
    Serve {
        env: String,
        endpoint: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop after this many sessions.
        #[arg(long)]
        sessions: Option<u64>,
    },
    /// List configuration keys with their defaults.
    Keys,
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { cfg, resume } => {
            let cfg = cfg.resolve()?;
            let s = commands::train(&cfg, resume.as_deref())?;
            println!("{} steps, {} evaluations", s.steps, s.reports.len());
            match (&s.best, &s.best_checkpoint) {
                (Some((step, mean)), Some(path)) => println!("best eval mean {mean:.3} at step {step}: {}", path.display()),
                _ => println!("no evaluation ran"),
            }
        }
        Command::Eval { cfg, checkpoint, episodes, epsilon, csv } => {
            let cfg = cfg.resolve()?;
            let r = commands::eval(&cfg, &checkpoint, &EvalOptions { episodes, epsilon })?;
            print!("{}", commands::format_report(&r));
            if let Some(p) = csv {
                write_or_print(Some(&p), &commands::scores_csv(&r))?;
            }
        }
        Command::Bench { cfg, steps, rounds, csv } => {
            let r = commands::bench(&cfg.resolve()?, steps, rounds)?;
            print!("{}", r.to_text());
            if let Some(p) = csv {
                write_or_print(Some(&p), &r.to_csv())?;
            }
        }
        Command::Probe { cfg, checkpoint, trajectory, csv } => {
            let cfg = cfg.resolve()?;
            let out = commands::probe(&cfg, &checkpoint, &commands::read_text(&trajectory)?)?;
            write_or_print(csv.as_ref(), &out)?;
        }
        Command::Record { cfg, checkpoint, epsilon, max_steps, output } => {
            let cfg = cfg.resolve()?;
            let out = commands::record(&cfg, checkpoint.as_deref(), max_steps, epsilon)?;
            write_or_print(Some(&output), &out)?;
        }
        Command::Serve { env, endpoint, seed, sessions } => {
            let kind = EnvKind::parse(&env)?;
            let endpoint: Endpoint = endpoint.parse()?;
            for end in commands::serve(kind, &endpoint, seed, sessions)? {
                log::info!("session ended: {end:?}");
            }
        }
        Command::Keys => {
            for k in KEYS {
                let default = match k.auto {
                    Some((g, b)) => format!("auto (gridworld {g}, minibreakout {b})", b = if b.is_empty() { "computed" } else { b }),
                    None if k.default.is_empty() => "unset".into(),
                    None => k.default.into(),
                };
                println!("{:<22} {:<40} {}", k.key, default, k.doc);
            }
        }
    }
    Ok(())
}
