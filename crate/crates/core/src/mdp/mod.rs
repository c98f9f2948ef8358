//! Finite MDPs, the value-iteration oracle and tabular Q-learning.
//!
//! Everything here is exact: these routines are the ground truth that the
//! neural agent is compared against.

mod format;
pub mod gridworld;
mod tabular;

pub use format::{parse_mdp, write_mdp};
pub use tabular::{run_tabular_q_learning, StartRule, TabularRun, TabularSchedule};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PROB_TOLERANCE: f64 = 1e-9;

/// One outcome of taking an action: next state, its probability and the reward
/// received on that transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<F> {
    pub next: usize,
    pub prob: F,
    pub reward: F,
}

/// The five-tuple (states, actions, transitions, rewards, terminal set).
///
/// Transitions and rewards are stored together per `(s, a)` pair. Terminal
/// states absorb and carry no outgoing transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<F> {
    num_states: usize,
    num_actions: usize,
    outcomes: Vec<Vec<Outcome<F>>>,
    terminal: Vec<bool>,
}

impl<F: Scalar> TabularMdp<F> {
    /// Builds an MDP from per-`(s, a)` outcome lists, indexed `s * num_actions + a`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        outcomes: Vec<Vec<Outcome<F>>>,
        terminals: &[usize],
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if outcomes.len() != num_states * num_actions {
            return Err(Error::InvalidMdp(format!(
                "expected {} outcome lists, got {}",
                num_states * num_actions,
                outcomes.len()
            )));
        }
        let mut terminal = vec![false; num_states];
        for &t in terminals {
            if t >= num_states {
                return Err(Error::InvalidMdp(format!("terminal state {t} out of range")));
            }
            terminal[t] = true;
        }
        let mdp = Self {
            num_states,
            num_actions,
            outcomes,
            terminal,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let list = &self.outcomes[s * self.num_actions + a];
                if self.terminal[s] {
                    if !list.is_empty() {
                        return Err(Error::InvalidMdp(format!(
                            "terminal state {s} has outgoing transitions"
                        )));
                    }
                    continue;
                }
                let mut total = 0.0;
                for o in list {
                    if o.next >= self.num_states {
                        return Err(Error::InvalidMdp(format!(
                            "transition ({s}, {a}) -> {} references a missing state",
                            o.next
                        )));
                    }
                    let p = o.prob.as_f64();
                    if !(p >= 0.0) || !o.reward.is_finite() {
                        return Err(Error::InvalidMdp(format!(
                            "transition ({s}, {a}) -> {} has invalid probability or reward",
                            o.next
                        )));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    return Err(Error::InvalidMdp(format!(
                        "probabilities for ({s}, {a}) sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states).filter(|&s| self.terminal[s])
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome<F>] {
        &self.outcomes[s * self.num_actions + a]
    }

    /// Samples one transition. Stepping from a terminal state is an error.
    pub fn step(&self, s: usize, a: usize, rng: &mut crate::Rng) -> Result<(usize, F)> {
        use rand::Rng as _;
        self.check_state(s)?;
        self.check_action(a)?;
        if self.terminal[s] {
            return Err(Error::SteppedTerminal);
        }
        let list = self.outcomes(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for o in list {
            acc += o.prob.as_f64();
            if u < acc {
                return Ok((o.next, o.reward));
            }
        }
        let last = list.last().expect("validated non-empty");
        Ok((last.next, last.reward))
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: s,
                limit: self.num_states,
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                limit: self.num_actions,
            });
        }
        Ok(())
    }

    /// Same MDP with `shift` added to every reward.
    pub fn with_reward_shift(&self, shift: F) -> Self {
        let mut out = self.clone();
        for list in &mut out.outcomes {
            for o in list {
                o.reward += shift;
            }
        }
        out
    }
}

/// Dense `num_states x num_actions` table of action values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<F> {
    num_states: usize,
    num_actions: usize,
    values: Vec<F>,
}

impl<F: Scalar> QTable<F> {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![F::zero(); num_states * num_actions],
        }
    }

    pub fn for_mdp(mdp: &TabularMdp<F>) -> Self {
        Self::zeros(mdp.num_states, mdp.num_actions)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> F {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: F) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn max_value(&self, s: usize) -> F {
        self.row(s)
            .iter()
            .copied()
            .fold(F::neg_infinity(), F::max)
    }

    /// Greedy action; ties go to the lowest action id.
    pub fn argmax(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    /// Every action whose value is within `tol` of the row maximum.
    pub fn optimal_actions(&self, s: usize, tol: F) -> Vec<usize> {
        let best = self.max_value(s);
        self.row(s)
            .iter()
            .enumerate()
            .filter(|(_, &v)| best - v <= tol)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &QTable<F>) -> F {
        assert_eq!(self.values.len(), other.values.len(), "table shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), F::max)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<F> {
    pub discount: F,
    pub convergence_tol: F,
    pub max_iterations: usize,
}

impl<F: Scalar> SolverConfig<F> {
    pub fn new(discount: F, convergence_tol: F, max_iterations: usize) -> Result<Self> {
        let cfg = Self {
            discount,
            convergence_tol,
            max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount >= F::zero() && self.discount <= F::one()) {
            return Err(Error::Config(format!("discount {} outside [0, 1]", self.discount)));
        }
        if !(self.convergence_tol > F::zero()) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        Ok(())
    }
}

impl<F: Scalar> Default for SolverConfig<F> {
    fn default() -> Self {
        Self {
            discount: F::of(0.99),
            convergence_tol: F::of(1e-10),
            max_iterations: 100_000,
        }
    }
}

/// One synchronous Bellman optimality backup of `q` into `out`.
pub fn bellman_backup<F: Scalar>(mdp: &TabularMdp<F>, q: &QTable<F>, discount: F, out: &mut QTable<F>) {
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let v = if mdp.terminal[s] {
                F::zero()
            } else {
                mdp.outcomes(s, a)
                    .iter()
                    .map(|o| {
                        let future = if mdp.terminal[o.next] {
                            F::zero()
                        } else {
                            q.max_value(o.next)
                        };
                        o.prob * (o.reward + discount * future)
                    })
                    .sum()
            };
            out.set(s, a, v);
        }
    }
}

/// Max-norm distance between `q` and its Bellman backup.
pub fn bellman_residual<F: Scalar>(mdp: &TabularMdp<F>, q: &QTable<F>, discount: F) -> F {
    let mut backed = QTable::for_mdp(mdp);
    bellman_backup(mdp, q, discount, &mut backed);
    backed.max_abs_diff(q)
}

/// Computes Q* by synchronous (Jacobi) value iteration.
///
/// The returned table satisfies `|B(Q) - Q|_inf <= convergence_tol`.
pub fn value_iteration<F: Scalar>(mdp: &TabularMdp<F>, cfg: &SolverConfig<F>) -> Result<QTable<F>> {
    cfg.validate()?;
    let mut q = QTable::for_mdp(mdp);
    let mut next = QTable::for_mdp(mdp);
    let mut residual = F::infinity();
    for _ in 0..cfg.max_iterations {
        bellman_backup(mdp, &q, cfg.discount, &mut next);
        std::mem::swap(&mut q, &mut next);
        // residual of the new iterate is at most discount * this step size
        let step = q.max_abs_diff(&next);
        residual = cfg.discount * step;
        if residual <= cfg.convergence_tol {
            return Ok(q);
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        residual: residual.as_f64(),
    })
}

/// Applies a single tabular Q-learning backup to entry `(s, a)`.
#[allow(clippy::too_many_arguments)]
pub fn q_learning_update<F: Scalar>(
    q: &mut QTable<F>,
    s: usize,
    a: usize,
    reward: F,
    s_next: usize,
    terminal: bool,
    alpha: F,
    gamma: F,
) -> Result<()> {
    for (what, index, limit) in [
        ("state", s, q.num_states),
        ("next state", s_next, q.num_states),
        ("action", a, q.num_actions),
    ] {
        if index >= limit {
            return Err(Error::OutOfRange { what, index, limit });
        }
    }
    if !(alpha > F::zero() && alpha <= F::one()) {
        return Err(Error::Config(format!("step size {alpha} outside (0, 1]")));
    }
    let future = if terminal { F::zero() } else { q.max_value(s_next) };
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (reward + gamma * future - old));
    Ok(())
}
