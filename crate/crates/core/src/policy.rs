use rand::Rng as _;

use crate::mdp::argmax;
use crate::scalar::Rng;

/// With probability `epsilon` a uniformly random action, otherwise the
/// greedy one (lowest id on ties).
///
/// Always consumes exactly one uniform draw, plus one more when exploring, so
/// callers sharing a seed stay in lockstep.
pub fn epsilon_greedy<F: PartialOrd + Copy>(values: &[F], epsilon: f64, rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..values.len())
    } else {
        argmax(values)
    }
}

/// Linear interpolation from `start` to `end` over `steps`, constant afterwards.
pub fn linear_decay(start: f64, end: f64, steps: usize, t: usize) -> f64 {
    if steps == 0 || t >= steps {
        return end;
    }
    start + (end - start) * (t as f64 / steps as f64)
}
