//! Pixel environments exposing screen, reward, terminal flag and lives.

pub mod breakout;
mod gridworld;
mod io;
mod mdp_env;

pub use breakout::{Ball, BreakoutConfig, MiniBreakout};
pub use gridworld::GridWorldPixels;
pub use io::{read_pgm, read_trajectory, replay_trajectory, write_pgm, write_trajectory, TrajectoryEntry};
pub use mdp_env::OneHotMdpEnv;

use crate::error::{Error, Result};

/// What the environment reports after a reset or a single emulator frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    /// Row-major grayscale pixels, `width * height` bytes.
    pub frame: Vec<u8>,
    pub reward: f64,
    pub terminal: bool,
    pub lives: u32,
}

impl EnvStep {
    pub fn blank(spec: &EnvSpec) -> Self {
        Self {
            frame: vec![0; spec.frame_len()],
            reward: 0.0,
            terminal: false,
            lives: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSpec {
    pub frame_width: usize,
    pub frame_height: usize,
    pub action_names: Vec<String>,
    pub noop_action: usize,
    pub release_action: Option<usize>,
}

impl EnvSpec {
    pub fn new(
        frame_width: usize,
        frame_height: usize,
        action_names: &[&str],
        noop_action: usize,
        release_action: Option<usize>,
    ) -> Result<Self> {
        let spec = Self {
            frame_width,
            frame_height,
            action_names: action_names.iter().map(|s| s.to_string()).collect(),
            noop_action,
            release_action,
        };
        if spec.num_actions() < 2 {
            return Err(Error::Config("an environment needs at least two actions".into()));
        }
        if noop_action >= spec.num_actions() || release_action.is_some_and(|r| r >= spec.num_actions() || r == noop_action) {
            return Err(Error::Config("no-op/release action ids out of range or clashing".into()));
        }
        if frame_width == 0 || frame_height == 0 {
            return Err(Error::Config("frame dimensions must be positive".into()));
        }
        Ok(spec)
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_width * self.frame_height
    }

    pub fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions() {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                limit: self.num_actions(),
            });
        }
        Ok(())
    }
}

/// Single-frame environment interface. Wrappers add action repeat, frame
/// history, no-op starts and life-loss termination on top.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new game at full lives; deterministic in `seed`.
    fn reset_into(&mut self, seed: u64, out: &mut EnvStep) -> Result<()>;

    /// Advances exactly one emulator frame.
    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()>;

    fn lives(&self) -> u32;

    fn reset(&mut self, seed: u64) -> Result<EnvStep> {
        let mut out = EnvStep::blank(self.spec());
        self.reset_into(seed, &mut out)?;
        Ok(out)
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let mut out = EnvStep::blank(self.spec());
        self.step_into(action, &mut out)?;
        Ok(out)
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn reset_into(&mut self, seed: u64, out: &mut EnvStep) -> Result<()> {
        (**self).reset_into(seed, out)
    }

    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()> {
        (**self).step_into(action, out)
    }

    fn lives(&self) -> u32 {
        (**self).lives()
    }
}

/// Named toy environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    MiniBreakout,
    GridWorld,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "minibreakout" | "breakout" => Ok(Self::MiniBreakout),
            "gridworld" => Ok(Self::GridWorld),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MiniBreakout => "minibreakout",
            Self::GridWorld => "gridworld",
        }
    }

    pub fn make(self) -> Box<dyn Environment + Send> {
        match self {
            Self::MiniBreakout => Box::new(MiniBreakout::new(BreakoutConfig::default())),
            Self::GridWorld => Box::new(GridWorldPixels::new()),
        }
    }
}
