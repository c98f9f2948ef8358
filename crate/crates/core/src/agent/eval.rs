use std::time::Instant;

use rand::Rng as _;

use super::learner::select_action;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::neural::{QNetwork, Workspace};
use crate::scalar::{derive_seed, seeded_rng, Scalar};
use crate::wrappers::{scale_pixels, WrappedEnv};

/// Scores of one evaluation round.
///
/// `sigma` is the sample standard deviation and `ci95` the half-width of a
/// normal 95% interval for the mean (`1.96 * sigma / sqrt(n)`); both are
/// reported since a bare "±" is ambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub step: u64,
    pub epsilon: f64,
    /// Per-game scores in play order.
    pub scores: Vec<f64>,
    /// No-op frames executed at the start of each game.
    pub noops: Vec<usize>,
    pub mean: f64,
    pub sigma: f64,
    pub ci95: f64,
    pub frames: u64,
    pub fps: f64,
    /// File name of the checkpoint saved for this round, if any.
    pub checkpoint: Option<String>,
}

impl EvalReport {
    /// Statistics are computed over the sorted scores, so they do not depend
    /// on the order games finished in.
    pub fn from_scores(step: u64, epsilon: f64, scores: Vec<f64>, noops: Vec<usize>) -> Self {
        let (mean, sigma) = mean_sigma(&scores);
        let n = scores.len() as f64;
        let ci95 = if scores.is_empty() { 0.0 } else { 1.96 * sigma / n.sqrt() };
        Self { step, epsilon, scores, noops, mean, sigma, ci95, frames: 0, fps: 0.0, checkpoint: None }
    }

    /// Whether `mean`/`sigma` agree with the raw scores.
    pub fn is_consistent(&self) -> bool {
        let (m, s) = mean_sigma(&self.scores);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs()) || (a.is_nan() && b.is_nan());
        close(m, self.mean) && close(s, self.sigma)
    }
}

fn mean_sigma(scores: &[f64]) -> (f64, f64) {
    if scores.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sigma = if sorted.len() < 2 {
        0.0
    } else {
        (sorted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, sigma)
}

/// Plays `episodes` whole games with an epsilon-greedy policy.
///
/// Games end only at true game over (life-loss termination must be off) or
/// after `max_steps` agent steps when that is non-zero. Deterministic in `seed`.
pub fn evaluate<F: Scalar, E: Environment>(
    net: &QNetwork<F>,
    env: &mut WrappedEnv<E>,
    episodes: usize,
    epsilon: f64,
    max_steps: u64,
    seed: u64,
    step: u64,
) -> Result<EvalReport> {
    if env.config().life_loss_terminal {
        return Err(Error::Config("evaluation must use game-over terminals, not life loss".into()));
    }
    let started = Instant::now();
    let frames_before = env.frames_consumed();
    env.reseed(derive_seed(seed, 1));
    let mut rng = seeded_rng(derive_seed(seed, 2));
    let mut ws = Workspace::new(net, 1);
    let mut input = vec![F::zero(); net.input_len()];
    let mut scores = Vec::with_capacity(episodes);
    let mut noops = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.begin_episode()?;
        noops.push(env.last_noops());
        let mut score = 0.0;
        let mut steps = 0;
        loop {
            scale_pixels(env.stack().as_bytes(), &mut input);
            let action = select_action(net, &mut ws, &input, epsilon, &mut rng)?;
            let out = env.step(action)?;
            score += out.reward;
            steps += 1;
            if out.game_over {
                break;
            }
            if max_steps > 0 && steps >= max_steps {
                env.end_game();
                break;
            }
        }
        scores.push(score);
    }
    let mut report = EvalReport::from_scores(step, epsilon, scores, noops);
    report.frames = env.frames_consumed() - frames_before;
    report.fps = report.frames as f64 / started.elapsed().as_secs_f64().max(1e-9);
    Ok(report)
}

/// Scores of a uniformly random policy under the evaluation protocol.
pub fn random_policy_scores<E: Environment>(env: &mut WrappedEnv<E>, episodes: usize, max_steps: u64, seed: u64) -> Result<Vec<f64>> {
    env.reseed(derive_seed(seed, 1));
    let mut rng = seeded_rng(derive_seed(seed, 2));
    let n = env.num_actions();
    let mut scores = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.begin_episode()?;
        let mut score = 0.0;
        let mut steps = 0;
        loop {
            let out = env.step(rng.random_range(0..n))?;
            score += out.reward;
            steps += 1;
            if out.game_over {
                break;
            }
            if max_steps > 0 && steps >= max_steps {
                env.end_game();
                break;
            }
        }
        scores.push(score);
    }
    Ok(scores)
}

/// Keeps the best evaluation mean seen so far; a new best must be strictly
/// greater.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BestTracker {
    best: Option<(u64, f64)>,
}

impl BestTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an evaluation; returns whether it is the new best.
    pub fn offer(&mut self, step: u64, mean: f64) -> bool {
        if mean.is_nan() {
            return false;
        }
        if self.best.is_none_or(|(_, b)| mean > b) {
            self.best = Some((step, mean));
            return true;
        }
        false
    }

    /// `(step, mean)` of the best evaluation.
    pub fn best(&self) -> Option<(u64, f64)> {
        self.best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_rule() {
        let mut t = BestTracker::new();
        let picks: Vec<bool> = [2.0, 5.0, 3.0].iter().enumerate().map(|(i, &m)| t.offer(i as u64, m)).collect();
        assert_eq!(picks, vec![true, true, false]);
        assert_eq!(t.best(), Some((1, 5.0)));
    }

    #[test]
    fn ties_keep_the_earlier_eval() {
        let mut t = BestTracker::new();
        t.offer(0, 1.0);
        assert!(!t.offer(1, 1.0));
        assert!(!t.offer(2, f64::NAN));
        assert_eq!(t.best(), Some((0, 1.0)));
    }

    #[test]
    fn report_statistics() {
        let r = EvalReport::from_scores(10, 0.05, vec![1.0, 3.0, 2.0], vec![0, 1, 2]);
        assert_eq!(r.mean, 2.0);
        assert!((r.sigma - 1.0).abs() < 1e-15);
        assert!((r.ci95 - 1.96 / 3f64.sqrt()).abs() < 1e-15);
        assert!(r.is_consistent());
        let single = EvalReport::from_scores(0, 0.05, vec![4.0], vec![0]);
        assert_eq!((single.mean, single.sigma), (4.0, 0.0));
    }
}
