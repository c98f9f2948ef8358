use super::{EnvSpec, EnvStep, Environment};
use crate::error::{Error, Result};
use crate::mdp::gridworld::{self as grid, ACTIONS, GOAL, START};

const FRAME: usize = 32;
const CELL: usize = 6;
const MARGIN: usize = 1;
const AGENT_SHADE: u8 = 255;
const GOAL_SHADE: u8 = 96;

/// The 5x5 gridworld rendered as a 32x32 frame: 6-pixel cells, the agent a
/// bright 4x4 block, the goal a dim one. There are no lives; `lives` is 1.
#[derive(Debug, Clone)]
pub struct GridWorldPixels {
    spec: EnvSpec,
    pos: (usize, usize),
    terminal: bool,
}

impl GridWorldPixels {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec::new(FRAME, FRAME, &ACTIONS, 0, None).expect("static spec is valid"),
            pos: START,
            terminal: false,
        }
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    /// Frame showing the agent at `(x, y)`.
    pub fn render_at(x: usize, y: usize) -> Vec<u8> {
        let mut frame = vec![0; FRAME * FRAME];
        Self::render_into(x, y, &mut frame);
        frame
    }

    fn render_into(x: usize, y: usize, frame: &mut Vec<u8>) {
        frame.clear();
        frame.resize(FRAME * FRAME, 0);
        let mut block = |cx: usize, cy: usize, shade: u8| {
            let x0 = MARGIN + cx * CELL + 1;
            let y0 = MARGIN + cy * CELL + 1;
            for row in y0..y0 + CELL - 2 {
                frame[row * FRAME + x0..row * FRAME + x0 + CELL - 2].fill(shade);
            }
        };
        block(GOAL.0, GOAL.1, GOAL_SHADE);
        block(x, y, AGENT_SHADE);
    }

    fn fill(&self, reward: f64, out: &mut EnvStep) {
        Self::render_into(self.pos.0, self.pos.1, &mut out.frame);
        out.reward = reward;
        out.terminal = self.terminal;
        out.lives = 1;
    }
}

impl Default for GridWorldPixels {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for GridWorldPixels {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_into(&mut self, _seed: u64, out: &mut EnvStep) -> Result<()> {
        self.pos = START;
        self.terminal = false;
        self.fill(0.0, out);
        Ok(())
    }

    fn step_into(&mut self, action: usize, out: &mut EnvStep) -> Result<()> {
        self.spec.check_action(action)?;
        if self.terminal {
            return Err(Error::SteppedTerminal);
        }
        self.pos = grid::move_from(self.pos.0, self.pos.1, action);
        let reward = if self.pos == GOAL {
            self.terminal = true;
            1.0
        } else {
            0.0
        };
        self.fill(reward, out);
        Ok(())
    }

    fn lives(&self) -> u32 {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_renders_agent_at_start() {
        let mut env = GridWorldPixels::new();
        let s = env.reset(0).unwrap();
        assert_eq!(s.frame[(MARGIN + 1) * FRAME + MARGIN + 1], AGENT_SHADE);
        assert_eq!((s.lives, s.terminal, s.reward), (1, false, 0.0));
        assert_eq!(env.lives(), 1);
    }

    #[test]
    fn goal_pays_and_terminates() {
        let mut env = GridWorldPixels::new();
        env.reset(0).unwrap();
        let path = [4, 4, 4, 4, 2, 2, 2];
        for &a in &path {
            let s = env.step(a).unwrap();
            assert_eq!(s.reward, 0.0);
            assert!(!s.terminal);
        }
        let s = env.step(2).unwrap();
        assert_eq!((s.reward, s.terminal), (1.0, true));
        assert!(env.step(0).is_err());
    }

    #[test]
    fn distinct_cells_render_distinct_frames() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..grid::num_states() {
            let (x, y) = grid::coords(s);
            assert!(seen.insert(GridWorldPixels::render_at(x, y)));
        }
    }
}
