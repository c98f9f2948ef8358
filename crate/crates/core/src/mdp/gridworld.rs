//! The 5x5 deterministic gridworld shared by the tabular oracle and the
//! pixel environment.

use super::{Outcome, TabularMdp};
use crate::error::Result;
use crate::scalar::Scalar;

pub const WIDTH: usize = 5;
pub const HEIGHT: usize = 5;
pub const START: (usize, usize) = (0, 0);
pub const GOAL: (usize, usize) = (WIDTH - 1, HEIGHT - 1);

/// Action labels, in id order. Moving into the boundary leaves the agent in place.
pub const ACTIONS: [&str; 5] = ["No-op", "Up", "Down", "Left", "Right"];

pub fn state_id(x: usize, y: usize) -> usize {
    y * WIDTH + x
}

pub fn coords(state: usize) -> (usize, usize) {
    (state % WIDTH, state / WIDTH)
}

/// Deterministic successor cell for `action` from `(x, y)`.
pub fn move_from(x: usize, y: usize, action: usize) -> (usize, usize) {
    match action {
        1 => (x, y.saturating_sub(1)),
        2 => (x, (y + 1).min(HEIGHT - 1)),
        3 => (x.saturating_sub(1), y),
        4 => ((x + 1).min(WIDTH - 1), y),
        _ => (x, y),
    }
}

pub fn num_states() -> usize {
    WIDTH * HEIGHT
}

/// Reward 1 on entering the goal, 0 otherwise; the goal is the only terminal.
pub fn gridworld_mdp<F: Scalar>() -> Result<TabularMdp<F>> {
    let goal = state_id(GOAL.0, GOAL.1);
    let mut outcomes = Vec::with_capacity(num_states() * ACTIONS.len());
    for s in 0..num_states() {
        let (x, y) = coords(s);
        for a in 0..ACTIONS.len() {
            if s == goal {
                outcomes.push(Vec::new());
                continue;
            }
            let (nx, ny) = move_from(x, y, a);
            let next = state_id(nx, ny);
            let reward = if next == goal { F::one() } else { F::zero() };
            outcomes.push(vec![Outcome {
                next,
                prob: F::one(),
                reward,
            }]);
        }
    }
    TabularMdp::new(num_states(), ACTIONS.len(), outcomes, &[goal])
}
