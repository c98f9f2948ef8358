//! A 32x32 Breakout with a 5-pixel paddle, four brick rows and three lives.
//!
//! The ball moves one pixel per frame along both axes; the paddle moves two by default.
//! Bricks fill the full width, so clearing a side column opens a tunnel the
//! ball can travel through to bounce between the ceiling and the top row.

use rand::Rng as _;

use super::{EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};
use crate::scalar::{seeded_rng, Rng};

pub const WIDTH: usize = 32;
pub const HEIGHT: usize = 32;
pub const BRICK_TOP: usize = 6;
pub const BRICK_WIDTH: usize = 4;
pub const BRICKS_PER_ROW: usize = WIDTH / BRICK_WIDTH;
pub const PADDLE_Y: usize = 30;
const BRICK_SHADES: [u8; 4] = [200, 170, 140, 110];

pub const NOOP: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;
pub const RELEASE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakoutConfig {
    pub lives: u32,
    pub brick_rows: usize,
    pub paddle_width: usize,
    /// Pixels the paddle moves per frame.
    pub paddle_speed: i32,
    /// Frames the ball waits on the paddle before launching by itself.
    pub serve_delay: u32,
    /// Game-over cap on emulator frames.
    pub max_frames: u64,
}

impl Default for BreakoutConfig {
    fn default() -> Self {
        Self {
            lives: 3,
            brick_rows: 4,
            paddle_width: 5,
            paddle_speed: 2,
            serve_delay: 64,
            max_frames: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ball {
    pub x: i32,
    pub y: i32,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Debug, Clone)]
pub struct MiniBreakout {
    cfg: BreakoutConfig,
    spec: EnvSpec,
    bricks: Vec<bool>,
    paddle_x: i32,
    ball: Option<Ball>,
    serve_timer: u32,
    lives: u32,
    frames: u64,
    terminal: bool,
    rng: Rng,
}

impl MiniBreakout {
    pub fn new(cfg: BreakoutConfig) -> Self {
        assert!(cfg.brick_rows <= BRICK_SHADES.len(), "at most four brick rows");
        assert!(cfg.paddle_width >= 1 && cfg.paddle_width < WIDTH);
        let spec = EnvSpec::new(WIDTH, HEIGHT, &["No-op", "Left", "Right", "Release"], NOOP, Some(RELEASE))
            .expect("static spec is valid");
        let mut env = Self {
            cfg,
            spec,
            bricks: vec![true; cfg.brick_rows * BRICKS_PER_ROW],
            paddle_x: 0,
            ball: None,
            serve_timer: 0,
            lives: cfg.lives,
            frames: 0,
            terminal: false,
            rng: seeded_rng(0),
        };
        env.restart(0);
        env
    }

    pub fn brick_count(&self) -> usize {
        self.cfg.brick_rows * BRICKS_PER_ROW
    }

    pub fn bricks_left(&self) -> usize {
        self.bricks.iter().filter(|&&b| b).count()
    }

    pub fn ball(&self) -> Option<Ball> {
        self.ball
    }

    pub fn paddle_x(&self) -> i32 {
        self.paddle_x
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Scenario setup: puts the ball in play at the given position and velocity.
    pub fn place_ball(&mut self, ball: Ball) {
        self.ball = Some(ball);
    }

    /// Scenario setup: moves the paddle (left edge), clamped to the screen.
    pub fn set_paddle(&mut self, x: i32) {
        self.paddle_x = x.clamp(0, self.max_paddle_x());
    }

    /// Scenario setup: removes every brick for which `clear(row, column)` is true.
    pub fn clear_bricks(&mut self, mut clear: impl FnMut(usize, usize) -> bool) {
        for row in 0..self.cfg.brick_rows {
            for col in 0..BRICKS_PER_ROW {
                if clear(row, col) {
                    self.bricks[row * BRICKS_PER_ROW + col] = false;
                }
            }
        }
    }

    pub fn brick_at(&self, row: usize, col: usize) -> bool {
        self.bricks[row * BRICKS_PER_ROW + col]
    }

    fn max_paddle_x(&self) -> i32 {
        (WIDTH - self.cfg.paddle_width) as i32
    }

    fn restart(&mut self, seed: u64) {
        self.bricks.iter_mut().for_each(|b| *b = true);
        self.paddle_x = (WIDTH - self.cfg.paddle_width) as i32 / 2;
        self.ball = None;
        self.serve_timer = 0;
        self.lives = self.cfg.lives;
        self.frames = 0;
        self.terminal = false;
        self.rng = seeded_rng(seed);
    }

    fn brick_index(&self, x: i32, y: i32) -> Option<usize> {
        if x < 0 || x >= WIDTH as i32 || y < BRICK_TOP as i32 {
            return None;
        }
        let row = y as usize - BRICK_TOP;
        if row >= self.cfg.brick_rows {
            return None;
        }
        let idx = row * BRICKS_PER_ROW + x as usize / BRICK_WIDTH;
        self.bricks[idx].then_some(idx)
    }

    fn launch(&mut self) {
        let dx = if self.rng.random::<bool>() { 1 } else { -1 };
        self.ball = Some(Ball {
            x: self.paddle_x + self.cfg.paddle_width as i32 / 2,
            y: PADDLE_Y as i32 - 1,
            dx,
            dy: -1,
        });
    }

    /// Moves the ball one frame; returns the reward earned.
    fn advance_ball(&mut self) -> f64 {
        let Some(mut ball) = self.ball else { return 0.0 };
        let mut nx = ball.x + ball.dx;
        if nx < 0 || nx >= WIDTH as i32 {
            ball.dx = -ball.dx;
            nx = ball.x + ball.dx;
        }
        let mut ny = ball.y + ball.dy;
        if ny < 0 {
            ball.dy = -ball.dy;
            ny = ball.y + ball.dy;
        }
        let mut reward = 0.0;
        if let Some(idx) = self.brick_index(nx, ny) {
            self.bricks[idx] = false;
            reward = 1.0;
            ball.dy = -ball.dy;
        } else if ny == PADDLE_Y as i32 && ball.dy > 0 && (self.paddle_x..self.paddle_x + self.cfg.paddle_width as i32).contains(&nx) {
            let offset = nx - self.paddle_x;
            let centre = self.cfg.paddle_width as i32 / 2;
            ball.dy = -1;
            if offset < centre {
                ball.dx = -1;
            } else if offset > centre {
                ball.dx = 1;
            }
        } else if ny >= HEIGHT as i32 {
            self.ball = None;
            self.serve_timer = 0;
            self.lives -= 1;
            return 0.0;
        } else {
            ball.x = nx;
            ball.y = ny;
        }
        self.ball = Some(ball);
        reward
    }

    fn render(&self, frame: &mut Vec<u8>) {
        frame.clear();
        frame.resize(WIDTH * HEIGHT, 0);
        for row in 0..self.cfg.brick_rows {
            let y = BRICK_TOP + row;
            for col in 0..BRICKS_PER_ROW {
                if self.bricks[row * BRICKS_PER_ROW + col] {
                    let start = y * WIDTH + col * BRICK_WIDTH;
                    frame[start..start + BRICK_WIDTH].fill(BRICK_SHADES[row]);
                }
            }
        }
        let p = PADDLE_Y * WIDTH + self.paddle_x as usize;
        frame[p..p + self.cfg.paddle_width].fill(255);
        let (bx, by) = match self.ball {
            Some(b) => (b.x, b.y),
            None => (self.paddle_x + self.cfg.paddle_width as i32 / 2, PADDLE_Y as i32 - 1),
        };
        if (0..HEIGHT as i32).contains(&by) {
            frame[by as usize * WIDTH + bx as usize] = 255;
        }
    }

    fn fill(&self, reward: f64, out: &mut EnvStep) {
        self.render(&mut out.frame);
        out.reward = reward;
        out.terminal = self.terminal;
        out.lives = self.lives;
    }
}

impl Environment for MiniBreakout {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_into(&mut self, seed: u64, out: &mut EnvStep) -> Result<()> {
        self.restart(seed);
        self.fill(0.0, out);
        Ok(())
    }

    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()> {
        self.spec.check_action(action)?;
        if self.terminal {
            return Err(Error::SteppedTerminal);
        }
        self.frames += 1;
        match action {
            LEFT => self.paddle_x = (self.paddle_x - self.cfg.paddle_speed).max(0),
            RIGHT => self.paddle_x = (self.paddle_x + self.cfg.paddle_speed).min(self.max_paddle_x()),
            _ => {}
        }
        let reward = if self.ball.is_none() {
            self.serve_timer += 1;
            if action == RELEASE || self.serve_timer >= self.cfg.serve_delay {
                self.launch();
            }
            0.0
        } else {
            self.advance_ball()
        };
        if self.lives == 0 || self.bricks_left() == 0 || self.frames >= self.cfg.max_frames {
            self.terminal = true;
        }
        self.fill(reward, out);
        Ok(())
    }

    fn lives(&self) -> u32 {
        self.lives
    }
}
