//! Environment decorators: action repeat, frame history, random no-op starts
//! and life-loss termination.
//!
//! [`WrappedEnv`] composes them in a fixed order on every agent step:
//! `noop_start` (at game start only) -> `repeat_action` -> `life_loss_terminal`
//! -> `FrameStack::push`.

use rand::Rng as _;

use crate::env::{EnvStep, Environment};
use crate::error::{Error, Result};
use crate::scalar::{seeded_rng, Rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WrapperConfig {
    pub action_repeat: usize,
    pub history_len: usize,
    pub noop_max: usize,
    pub life_loss_terminal: bool,
    pub noop_action: usize,
    /// Max-pool the last two raw frames of each repeat window.
    pub max_pool: bool,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        Self {
            action_repeat: 4,
            history_len: 4,
            noop_max: 30,
            life_loss_terminal: false,
            noop_action: 0,
            max_pool: false,
        }
    }
}

impl WrapperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.action_repeat == 0 {
            return Err(Error::Config("action_repeat must be at least 1".into()));
        }
        if self.history_len == 0 {
            return Err(Error::Config("history_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// The last `m` agent-visible frames, oldest first, stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStack {
    history: usize,
    frame_len: usize,
    data: Vec<u8>,
}

impl FrameStack {
    pub fn new(history: usize, frame_len: usize) -> Self {
        assert!(history >= 1 && frame_len >= 1);
        Self {
            history,
            frame_len,
            data: vec![0; history * frame_len],
        }
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    fn check(&self, frame: &[u8]) -> Result<()> {
        if frame.len() != self.frame_len {
            return Err(Error::Shape {
                expected: format!("{} pixels", self.frame_len),
                actual: format!("{} pixels", frame.len()),
            });
        }
        Ok(())
    }

    /// Episode start: every slot holds `frame`.
    pub fn fill(&mut self, frame: &[u8]) -> Result<()> {
        self.check(frame)?;
        for slot in self.data.chunks_exact_mut(self.frame_len) {
            slot.copy_from_slice(frame);
        }
        Ok(())
    }

    /// Drops the oldest frame and appends `frame`.
    pub fn push(&mut self, frame: &[u8]) -> Result<()> {
        self.check(frame)?;
        self.data.copy_within(self.frame_len.., 0);
        let start = (self.history - 1) * self.frame_len;
        self.data[start..].copy_from_slice(frame);
        Ok(())
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn newest(&self) -> &[u8] {
        self.frame(self.history - 1)
    }

    pub fn frames(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.frame_len)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Writes pixels scaled to `[0, 1]` into `out` (length `history * frame_len`).
    pub fn write_scaled<F: Scalar>(&self, out: &mut [F]) {
        scale_pixels(&self.data, out);
    }
}

pub fn scale_pixels<F: Scalar>(bytes: &[u8], out: &mut [F]) {
    debug_assert_eq!(bytes.len(), out.len());
    let inv = F::one() / F::of(255.0);
    for (o, &b) in out.iter_mut().zip(bytes) {
        *o = F::of(b as f64) * inv;
    }
}

/// Applies `action` for `repeat` emulator frames, summing rewards and stopping
/// early on a terminal frame. Returns the number of frames consumed; `out`
/// holds the last frame (max-pooled with the one before it when `max_pool`).
pub fn repeat_action<E: Environment + ?Sized>(
    env: &mut E,
    action: usize,
    repeat: usize,
    max_pool: bool,
    out: &mut EnvStep,
    prev_frame: &mut Vec<u8>,
) -> Result<usize> {
    let mut total = 0.0;
    let mut frames = 0;
    for i in 0..repeat {
        if max_pool && i + 1 == repeat && i > 0 {
            prev_frame.clear();
            prev_frame.extend_from_slice(&out.frame);
        }
        env.step_into(action, out)?;
        total += out.reward;
        frames += 1;
        if out.terminal {
            break;
        }
    }
    if max_pool && frames == repeat && repeat > 1 {
        for (o, &p) in out.frame.iter_mut().zip(prev_frame.iter()) {
            *o = (*o).max(p);
        }
    }
    out.reward = total;
    Ok(frames)
}

/// Resets the environment and executes `k ~ U{0..=noop_max}` no-op frames.
///
/// If the game ends during the no-ops it is reset with a fresh seed and a new
/// `k` is drawn. Returns `k`; `out` holds the resulting frame.
pub fn noop_start<E: Environment + ?Sized>(
    env: &mut E,
    noop_max: usize,
    noop_action: usize,
    seed: u64,
    rng: &mut Rng,
    out: &mut EnvStep,
) -> Result<usize> {
    const MAX_ATTEMPTS: usize = 100;
    let mut game_seed = seed;
    for _ in 0..MAX_ATTEMPTS {
        env.reset_into(game_seed, out)?;
        let k = rng.random_range(0..=noop_max);
        let mut ended = false;
        for _ in 0..k {
            env.step_into(noop_action, out)?;
            if out.terminal {
                ended = true;
                break;
            }
        }
        if !ended {
            out.reward = 0.0;
            return Ok(k);
        }
        game_seed = rng.random();
    }
    env.reset_into(game_seed, out)?;
    Ok(0)
}

/// Marks `step` terminal when a life was lost since `prev_lives` (only when
/// `enabled`). The underlying game is left running. Returns whether a life was
/// lost.
pub fn life_loss_terminal(step: &mut EnvStep, prev_lives: u32, enabled: bool) -> Result<bool> {
    if step.lives > prev_lives {
        return Err(Error::LivesIncreased {
            prev: prev_lives,
            now: step.lives,
        });
    }
    let lost = step.lives < prev_lives;
    if enabled && lost {
        step.terminal = true;
    }
    Ok(lost)
}

/// Result of one agent step through the wrapper pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrappedStep {
    /// Reward summed over the repeat window.
    pub reward: f64,
    /// Episode end as seen by the learner (includes life-loss pseudo-terminals).
    pub terminal: bool,
    /// The underlying game ended.
    pub game_over: bool,
    pub lives: u32,
    pub frames: usize,
}

/// An environment behind the full wrapper pipeline.
pub struct WrappedEnv<E> {
    env: E,
    cfg: WrapperConfig,
    stack: FrameStack,
    step_buf: EnvStep,
    pool_buf: Vec<u8>,
    rng: Rng,
    prev_lives: u32,
    game_over: bool,
    last_noops: usize,
    frames_consumed: u64,
    agent_steps: u64,
    games: u64,
    episodes: u64,
}

impl<E: Environment> WrappedEnv<E> {
    pub fn new(env: E, cfg: WrapperConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        env.spec().check_action(cfg.noop_action)?;
        let frame_len = env.spec().frame_len();
        let stack = FrameStack::new(cfg.history_len, frame_len);
        let step_buf = EnvStep::blank(env.spec());
        Ok(Self {
            env,
            cfg,
            stack,
            step_buf,
            pool_buf: Vec::with_capacity(frame_len),
            rng: seeded_rng(seed),
            prev_lives: 0,
            game_over: true,
            last_noops: 0,
            frames_consumed: 0,
            agent_steps: 0,
            games: 0,
            episodes: 0,
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn into_inner(self) -> E {
        self.env
    }

    pub fn config(&self) -> &WrapperConfig {
        &self.cfg
    }

    pub fn stack(&self) -> &FrameStack {
        &self.stack
    }

    pub fn last_step(&self) -> &EnvStep {
        &self.step_buf
    }

    pub fn num_actions(&self) -> usize {
        self.env.spec().num_actions()
    }

    pub fn frames_consumed(&self) -> u64 {
        self.frames_consumed
    }

    pub fn agent_steps(&self) -> u64 {
        self.agent_steps
    }

    pub fn games(&self) -> u64 {
        self.games
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn last_noops(&self) -> usize {
        self.last_noops
    }

    pub fn is_game_over(&self) -> bool {
        self.game_over
    }

    /// Starts a new learner episode. A new game (with no-op start) begins only
    /// if the previous game ended; after a life-loss pseudo-terminal the game
    /// continues and only the frame history restarts.
    pub fn begin_episode(&mut self) -> Result<&FrameStack> {
        if self.game_over {
            self.start_game()?;
        }
        self.episodes += 1;
        self.stack.fill(&self.step_buf.frame)?;
        Ok(&self.stack)
    }

    /// Restarts the wrapper's random stream (game seeds and no-op counts) and
    /// abandons the current game.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = seeded_rng(seed);
        self.game_over = true;
    }

    /// Abandons the current game; the next `begin_episode` starts a new one.
    pub fn end_game(&mut self) {
        self.game_over = true;
    }

    fn start_game(&mut self) -> Result<()> {
        let seed: u64 = self.rng.random();
        let k = noop_start(
            &mut self.env,
            self.cfg.noop_max,
            self.cfg.noop_action,
            seed,
            &mut self.rng,
            &mut self.step_buf,
        )?;
        self.frames_consumed += k as u64;
        self.last_noops = k;
        self.prev_lives = self.step_buf.lives;
        self.game_over = false;
        self.games += 1;
        Ok(())
    }

    pub fn step(&mut self, action: usize) -> Result<WrappedStep> {
        if self.game_over {
            return Err(Error::SteppedTerminal);
        }
        let frames = repeat_action(
            &mut self.env,
            action,
            self.cfg.action_repeat,
            self.cfg.max_pool,
            &mut self.step_buf,
            &mut self.pool_buf,
        )?;
        self.frames_consumed += frames as u64;
        self.agent_steps += 1;
        let game_over = self.step_buf.terminal;
        life_loss_terminal(&mut self.step_buf, self.prev_lives, self.cfg.life_loss_terminal)?;
        self.prev_lives = self.step_buf.lives;
        self.stack.push(&self.step_buf.frame)?;
        self.game_over = game_over;
        Ok(WrappedStep {
            reward: self.step_buf.reward,
            terminal: self.step_buf.terminal,
            game_over,
            lives: self.step_buf.lives,
            frames,
        })
    }
}
