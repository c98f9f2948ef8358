use rand::Rng as _;

use super::{q_learning_update, QTable, TabularMdp};
use crate::error::{Error, Result};
use crate::policy::{epsilon_greedy, linear_decay};
use crate::scalar::{derive_seed, seeded_rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartRule {
    Fixed(usize),
    /// Uniform over non-terminal states (exploring starts).
    UniformNonTerminal,
}

/// Exploration and step-size schedule for tabular runs.
///
/// Exploration is epsilon-greedy with a linear per-episode decay. The step
/// size for a pair visited `n` times is `alpha_scale / n^alpha_exponent`,
/// capped at 1; an exponent of 0 gives a constant step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularSchedule<F> {
    pub discount: F,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub alpha_scale: F,
    pub alpha_exponent: F,
    pub max_steps_per_episode: usize,
    pub start: StartRule,
}

impl<F: Scalar> TabularSchedule<F> {
    fn alpha(&self, visits: u64) -> F {
        let n = F::of(visits.max(1) as f64);
        (self.alpha_scale / n.powf(self.alpha_exponent)).min(F::one())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon_end) || !(self.epsilon_end..=1.0).contains(&self.epsilon_start) {
            return Err(Error::Config("epsilon schedule must satisfy 0 <= end <= start <= 1".into()));
        }
        if !(self.alpha_scale > F::zero()) || self.alpha_exponent < F::zero() {
            return Err(Error::Config("step size must be positive and non-increasing".into()));
        }
        if self.max_steps_per_episode == 0 {
            return Err(Error::Config("max_steps_per_episode must be positive".into()));
        }
        Ok(())
    }
}

impl<F: Scalar> Default for TabularSchedule<F> {
    fn default() -> Self {
        Self {
            discount: F::of(0.99),
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_episodes: 1_000,
            alpha_scale: F::one(),
            alpha_exponent: F::of(0.6),
            max_steps_per_episode: 200,
            start: StartRule::Fixed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRun<F> {
    pub q: QTable<F>,
    /// Undiscounted return of every episode, in order.
    pub returns: Vec<F>,
}

/// Epsilon-greedy tabular Q-learning. Deterministic given `seed`.
pub fn run_tabular_q_learning<F: Scalar>(
    mdp: &TabularMdp<F>,
    episodes: usize,
    schedule: &TabularSchedule<F>,
    seed: u64,
) -> Result<TabularRun<F>> {
    schedule.validate()?;
    let non_terminal: Vec<usize> = (0..mdp.num_states()).filter(|&s| !mdp.is_terminal(s)).collect();
    if non_terminal.is_empty() {
        return Err(Error::InvalidMdp("no non-terminal state to start from".into()));
    }
    if let StartRule::Fixed(s) = schedule.start {
        if s >= mdp.num_states() || mdp.is_terminal(s) {
            return Err(Error::Config(format!("start state {s} is missing or terminal")));
        }
    }

    let mut act_rng = seeded_rng(derive_seed(seed, 1));
    let mut env_rng = seeded_rng(derive_seed(seed, 2));
    let mut start_rng = seeded_rng(derive_seed(seed, 3));

    let mut q = QTable::for_mdp(mdp);
    let mut visits = vec![0u64; mdp.num_states() * mdp.num_actions()];
    let mut returns = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let epsilon = linear_decay(
            schedule.epsilon_start,
            schedule.epsilon_end,
            schedule.epsilon_decay_episodes,
            episode,
        );
        let mut s = match schedule.start {
            StartRule::Fixed(s) => s,
            StartRule::UniformNonTerminal => non_terminal[start_rng.random_range(0..non_terminal.len())],
        };
        let mut total = F::zero();
        for _ in 0..schedule.max_steps_per_episode {
            let a = epsilon_greedy(q.row(s), epsilon, &mut act_rng);
            let (next, reward) = mdp.step(s, a, &mut env_rng)?;
            let terminal = mdp.is_terminal(next);
            let n = &mut visits[s * mdp.num_actions() + a];
            *n += 1;
            let alpha = schedule.alpha(*n);
            q_learning_update(&mut q, s, a, reward, next, terminal, alpha, schedule.discount)?;
            total += reward;
            if terminal {
                break;
            }
            s = next;
        }
        returns.push(total);
    }
    Ok(TabularRun { q, returns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::gridworld::gridworld_mdp;

    #[test]
    fn zero_episodes_leave_table_untouched() {
        let mdp = gridworld_mdp::<f64>().unwrap();
        let run = run_tabular_q_learning(&mdp, 0, &TabularSchedule::default(), 7).unwrap();
        assert_eq!(run.q, QTable::for_mdp(&mdp));
        assert!(run.returns.is_empty());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mdp = gridworld_mdp::<f64>().unwrap();
        let sched = TabularSchedule::default();
        let a = run_tabular_q_learning(&mdp, 50, &sched, 11).unwrap();
        let b = run_tabular_q_learning(&mdp, 50, &sched, 11).unwrap();
        assert_eq!(a, b);
        let c = run_tabular_q_learning(&mdp, 50, &sched, 12).unwrap();
        assert_ne!(a.q, c.q);
    }

    #[test]
    fn terminal_rows_stay_zero() {
        let mdp = gridworld_mdp::<f64>().unwrap();
        let run = run_tabular_q_learning(&mdp, 200, &TabularSchedule::default(), 3).unwrap();
        for t in mdp.terminals() {
            assert!(run.q.row(t).iter().all(|&v| v == 0.0));
        }
    }
}
