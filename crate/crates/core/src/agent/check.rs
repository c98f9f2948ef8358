use crate::error::Result;
use crate::mdp::gridworld::{coords, gridworld_mdp, num_states};
use crate::mdp::{argmax, value_iteration, SolverConfig};
use crate::neural::{QNetwork, Workspace};
use crate::scalar::Scalar;
use crate::env::GridWorldPixels;
use crate::wrappers::scale_pixels;

/// Greedy-policy agreement with the value-iteration optimum on the gridworld.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCheck {
    pub correct: usize,
    pub total: usize,
    /// Non-terminal states whose greedy action is not optimal.
    pub wrong: Vec<usize>,
}

impl PolicyCheck {
    pub fn is_optimal(&self) -> bool {
        self.wrong.is_empty()
    }
}

/// For every non-terminal cell, feeds the network a stack of `history`
/// copies of that cell's frame and checks the greedy action lies in the set
/// of optimal actions under `discount`.
pub fn gridworld_policy_check<F: Scalar>(net: &QNetwork<F>, history: usize, discount: f64) -> Result<PolicyCheck> {
    let mdp = gridworld_mdp::<f64>()?;
    let q = value_iteration(&mdp, &SolverConfig { discount, convergence_tol: 1e-12, max_iterations: 10_000 })?;
    let mut ws = Workspace::new(net, 1);
    let mut input = vec![F::zero(); net.input_len()];
    let mut check = PolicyCheck { correct: 0, total: 0, wrong: Vec::new() };
    for s in (0..num_states()).filter(|&s| !mdp.is_terminal(s)) {
        let (x, y) = coords(s);
        let frame = GridWorldPixels::render_at(x, y).repeat(history);
        scale_pixels(&frame, &mut input);
        let greedy = argmax(net.q_values(&mut ws, &input)?);
        check.total += 1;
        if q.optimal_actions(s, 1e-9).contains(&greedy) {
            check.correct += 1;
        } else {
            check.wrong.push(s);
        }
    }
    Ok(check)
}
