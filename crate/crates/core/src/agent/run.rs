use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::eval::{evaluate, BestTracker, EvalReport};
use super::learner::Agent;
use crate::checkpoint::Checkpoint;
use crate::env::Environment;
use crate::error::Result;
use crate::neural::QNetwork;
use crate::scalar::{derive_seed, Scalar};
use crate::wrappers::WrappedEnv;

pub const CSV_HEADER: &str = "step,episodes,train_return_mean,eval_mean,eval_sigma,fps";

/// One learning-curve row, written after each evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub step: u64,
    /// Learner episodes finished so far.
    pub episodes: u64,
    /// Mean return of the learner episodes finished since the previous row
    /// (NaN if none finished).
    pub train_return_mean: f64,
    pub eval_mean: f64,
    pub eval_sigma: f64,
    /// Training frames per second since the previous row (wall-clock, so it
    /// is the one column that differs between identical runs).
    pub fps: f64,
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.1}",
            self.step, self.episodes, self.train_return_mean, self.eval_mean, self.eval_sigma, self.fps
        )
    }
}

/// Returned by the per-evaluation callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub steps: u64,
    pub reports: Vec<EvalReport>,
    pub rows: Vec<CurveRow>,
    /// `(step, mean)` of the best evaluation.
    pub best: Option<(u64, f64)>,
    pub best_checkpoint: Option<PathBuf>,
    pub stopped_early: bool,
}

pub fn checkpoint_name(step: u64, mean: f64) -> String {
    format!("ckpt_{step}_{mean:.3}.qnet")
}

/// Trains until `total_steps`, evaluating every `eval_interval` steps.
///
/// With an `out_dir`, writes `learning_curve.csv`, a `ckpt_<step>_<mean>.qnet`
/// whenever an evaluation mean strictly beats every earlier one, and
/// `latest.qnet` (network plus optimizer state) after every evaluation for
/// resuming. `on_eval` sees each report and the online network and may stop
/// the run early.
pub fn run_training<F: Scalar, E: Environment, V: Environment>(
    agent: &mut Agent<F, E>,
    eval_env: &mut WrappedEnv<V>,
    out_dir: Option<&Path>,
    on_eval: &mut dyn FnMut(&EvalReport, &QNetwork<F>) -> EvalControl,
) -> Result<TrainingSummary> {
    let cfg = agent.config().clone();
    let sched = cfg.schedule;
    let mut csv = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join("learning_curve.csv"))?);
            writeln!(w, "{CSV_HEADER}")?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };

    let mut summary = TrainingSummary {
        steps: agent.steps(),
        reports: Vec::new(),
        rows: Vec::new(),
        best: None,
        best_checkpoint: None,
        stopped_early: false,
    };
    let mut best = BestTracker::new();
    let mut seg_start = Instant::now();
    let mut seg_frames = agent.env().frames_consumed();

    while agent.steps() < sched.total_steps {
        agent.step()?;
        let step = agent.steps();
        if step % sched.eval_interval != 0 {
            continue;
        }
        let train_secs = seg_start.elapsed().as_secs_f64().max(1e-9);
        let fps = (agent.env().frames_consumed() - seg_frames) as f64 / train_secs;

        let round = step / sched.eval_interval;
        let mut report = evaluate(
            agent.online(),
            eval_env,
            sched.eval_episodes,
            sched.eval_epsilon,
            cfg.max_episode_steps,
            derive_seed(cfg.seed, 1000 + round),
            step,
        )?;
        let (sum, count) = agent.take_train_returns();
        let row = CurveRow {
            step,
            episodes: agent.episodes(),
            train_return_mean: if count == 0 { f64::NAN } else { sum / count as f64 },
            eval_mean: report.mean,
            eval_sigma: report.sigma,
            fps,
        };
        log::info!(
            "step {step}: eval {:.3} ± {:.3} (ci95 {:.3}), train {:.3}, eps {:.3}, {:.0} fps",
            report.mean, report.sigma, report.ci95, row.train_return_mean, agent.epsilon(), fps
        );

        if best.offer(step, report.mean) {
            if let Some(dir) = out_dir {
                let name = checkpoint_name(step, report.mean);
                let path = dir.join(&name);
                Checkpoint::capture(agent.online(), Some(agent.optimizer()), step).save(&path)?;
                summary.best_checkpoint = Some(path);
                report.checkpoint = Some(name);
            }
        }
        if let Some(dir) = out_dir {
            Checkpoint::capture(agent.online(), Some(agent.optimizer()), step).save(&dir.join("latest.qnet"))?;
        }
        if let Some(w) = csv.as_mut() {
            writeln!(w, "{}", row.to_csv())?;
            w.flush()?;
        }
        let control = on_eval(&report, agent.online());
        summary.reports.push(report);
        summary.rows.push(row);
        if control == EvalControl::Stop {
            summary.stopped_early = true;
            break;
        }
        seg_start = Instant::now();
        seg_frames = agent.env().frames_consumed();
    }
    summary.steps = agent.steps();
    summary.best = best.best();
    Ok(summary)
}

impl<F: Scalar, E: Environment> Agent<F, E> {
    /// Loads network and optimizer state from a checkpoint and continues the
    /// step count from it. Replay memory starts empty; the target network is
    /// synced to the restored weights.
    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let net = ckpt.to_network::<F>()?;
        self.online_mut().load_slice(net.params())?;
        self.sync_target()?;
        ckpt.restore_optimizer(self.optimizer_mut())?;
        self.set_steps(ckpt.step);
        Ok(())
    }
}
