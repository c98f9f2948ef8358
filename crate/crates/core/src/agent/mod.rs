//! The deep Q-learning loop: epsilon-greedy acting, replay, minibatch updates
//! against a periodically synced target network, evaluation, checkpointing.

mod check;
mod eval;
mod learner;
mod probe;
mod run;

pub use check::{gridworld_policy_check, PolicyCheck};
pub use eval::{evaluate, random_policy_scores, BestTracker, EvalReport};
pub use learner::{select_action, td_targets, Agent, StepInfo};
pub use probe::{q_probe, QProbe};
pub use run::{checkpoint_name, run_training, CurveRow, EvalControl, TrainingSummary, CSV_HEADER};

use crate::error::{Error, Result};
use crate::neural::InitScheme;
use crate::optim::{ClipMode, OptimizerConfig};
use crate::policy::linear_decay;

/// Exploration rate: linear from `start` to `end` over `anneal_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, t: u64) -> f64 {
        linear_decay(self.start, self.end, self.anneal_steps as usize, t as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.end) || !(self.end..=1.0).contains(&self.start) {
            return Err(Error::Config("epsilon schedule must satisfy 0 <= end <= start <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub total_steps: u64,
    /// Agent steps of uniformly random acting before the first update.
    pub warmup_steps: u64,
    pub update_frequency: u64,
    /// Target network sync period `C`, in agent steps.
    pub target_sync: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
    pub batch_size: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            total_steps: 200_000,
            warmup_steps: 5_000,
            update_frequency: 4,
            target_sync: 2_000,
            eval_interval: 10_000,
            eval_episodes: 30,
            eval_epsilon: 0.05,
            batch_size: 32,
        }
    }
}

/// Whether the hot loop reuses preallocated buffers or allocates afresh on
/// every step (the benchmark baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocMode {
    Preallocated,
    Naive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub schedule: TrainSchedule,
    /// Annealing clock starts once warmup ends.
    pub epsilon: EpsilonSchedule,
    pub discount: f64,
    pub replay_capacity: usize,
    pub optimizer: OptimizerConfig,
    pub clip: ClipMode,
    /// Clamp rewards into [-1, 1] before storing them.
    pub reward_clip: bool,
    /// Truncate learner episodes (and evaluation games) after this many agent
    /// steps; 0 means no limit.
    pub max_episode_steps: u64,
    pub init: InitScheme,
    pub seed: u64,
    pub alloc: AllocMode,
}

impl Default for AgentConfig {
    fn default() -> Self {
        let schedule = TrainSchedule::default();
        Self {
            epsilon: EpsilonSchedule { start: 1.0, end: 0.1, anneal_steps: schedule.total_steps / 10 },
            schedule,
            discount: 0.99,
            replay_capacity: 50_000,
            optimizer: OptimizerConfig::deepmind(),
            clip: ClipMode::TdError,
            reward_clip: false,
            max_episode_steps: 0,
            init: InitScheme::FanInUniform,
            seed: 0,
            alloc: AllocMode::Preallocated,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if s.update_frequency == 0 {
            return bad("update_frequency must be at least 1");
        }
        if s.warmup_steps > s.total_steps {
            return bad("warmup_steps must not exceed total_steps");
        }
        if s.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if s.target_sync == 0 {
            return bad("target_sync must be positive");
        }
        if s.batch_size == 0 || s.batch_size > self.replay_capacity {
            return bad("batch_size must be in 1..=replay_capacity");
        }
        if !(0.0..=1.0).contains(&s.eval_epsilon) {
            return bad("eval_epsilon must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must be in [0, 1]");
        }
        self.epsilon.validate()?;
        self.optimizer.validate()
    }
}
