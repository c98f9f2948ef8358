//! Gradient-descent steppers: SGD, RMSProp and its momentum variant.
//!
//! RMSProp keeps `MS <- g_rms * MS + (1 - g_rms) * grad^2` per parameter and
//! steps `w -= lr * grad / sqrt(MS + eps)`. The momentum variant also tracks
//! `Mom <- eta * Mom + (1 - eta) * grad` and divides by
//! `sqrt(max(MS - Mom^2, 0) + eps)`; the clamp keeps the root real when the two
//! averages drift apart.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Sgd,
    RmspropHinton,
    RmspropDeepmind,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::RmspropHinton => "rmsprop_hinton",
            Self::RmspropDeepmind => "rmsprop_deepmind",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "rmsprop_hinton" => Ok(Self::RmspropHinton),
            "rmsprop_deepmind" => Ok(Self::RmspropDeepmind),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// What gets clipped to [-1, 1] during a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    /// The TD error `y - Q(phi, a)` before it is backpropagated (Huber-style gradient).
    TdError,
    /// Each parameter gradient after backprop.
    ParamGrad,
    None,
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td_error" | "on" | "true" => Ok(Self::TdError),
            "param_grad" => Ok(Self::ParamGrad),
            "none" | "off" | "false" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown clip mode `{other}`"))),
        }
    }
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TdError => "td_error",
            Self::ParamGrad => "param_grad",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub momentum_decay: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self { variant: Variant::Sgd, learning_rate, ..Self::hinton() }
    }

    pub fn hinton() -> Self {
        Self {
            variant: Variant::RmspropHinton,
            learning_rate: 0.00005,
            rms_decay: 0.95,
            momentum_decay: 0.95,
            epsilon: 0.01,
        }
    }

    pub fn deepmind() -> Self {
        Self { variant: Variant::RmspropDeepmind, learning_rate: 0.00025, ..Self::hinton() }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Sgd => Self::sgd(0.01),
            Variant::RmspropHinton => Self::hinton(),
            Variant::RmspropDeepmind => Self::deepmind(),
        }
    }

    /// `momentum_decay` may be 1: the momentum average then stays at zero and
    /// the momentum variant reduces exactly to plain RMSProp.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("optimizer: {msg}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.variant == Variant::Sgd {
            return Ok(());
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return bad("rms_decay must be in [0, 1)");
        }
        if self.variant == Variant::RmspropDeepmind && !(0.0..=1.0).contains(&self.momentum_decay) {
            return bad("momentum_decay must be in [0, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Per-parameter running averages. `momentum` is empty unless the momentum
/// variant is in use.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<F> {
    pub mean_square: Vec<F>,
    pub momentum: Vec<F>,
}

impl<F: Scalar> OptimizerState<F> {
    pub fn new(variant: Variant, len: usize) -> Self {
        let ms = if variant == Variant::Sgd { 0 } else { len };
        let mom = if variant == Variant::RmspropDeepmind { len } else { 0 };
        Self { mean_square: vec![F::zero(); ms], momentum: vec![F::zero(); mom] }
    }

    pub fn reset(&mut self) {
        self.mean_square.fill(F::zero());
        self.momentum.fill(F::zero());
    }
}

/// Clamps a TD error into [-1, 1].
pub fn clip_error<F: Scalar>(td_error: F) -> Result<F> {
    if td_error.is_nan() {
        return Err(Error::NonFinite("td error"));
    }
    Ok(td_error.max(-F::one()).min(F::one()))
}

fn check_lengths<F>(params: &[F], grads: &[F]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape {
            expected: format!("{} gradient entries", params.len()),
            actual: format!("{}", grads.len()),
        });
    }
    Ok(())
}

/// Rejects gradients whose square would overflow, so no update starts with
/// an input that cannot produce a finite result.
fn check_grads<F: Scalar>(grads: &[F]) -> Result<()> {
    let limit = F::max_value().sqrt();
    if grads.iter().all(|g| g.abs() < limit) {
        Ok(())
    } else {
        Err(Error::NonFinite("gradient"))
    }
}

fn check_params<F: Scalar>(params: &[F]) -> Result<()> {
    if params.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("parameter after update"))
    }
}

pub fn step_sgd<F: Scalar>(params: &mut [F], grads: &[F], cfg: &OptimizerConfig) -> Result<()> {
    check_lengths(params, grads)?;
    check_grads(grads)?;
    let lr = F::of(cfg.learning_rate);
    for (w, &g) in params.iter_mut().zip(grads) {
        *w -= lr * g;
    }
    check_params(params)
}

pub fn step_rmsprop_hinton<F: Scalar>(params: &mut [F], grads: &[F], state: &mut OptimizerState<F>, cfg: &OptimizerConfig) -> Result<()> {
    check_lengths(params, grads)?;
    check_lengths(params, &state.mean_square)?;
    check_grads(grads)?;
    let (lr, decay, eps) = (F::of(cfg.learning_rate), F::of(cfg.rms_decay), F::of(cfg.epsilon));
    let keep = F::one() - decay;
    for ((w, &g), ms) in params.iter_mut().zip(grads).zip(&mut state.mean_square) {
        *ms = decay * *ms + keep * g * g;
        *w -= lr * g / (*ms + eps).sqrt();
    }
    check_params(params)
}

pub fn step_rmsprop_deepmind<F: Scalar>(params: &mut [F], grads: &[F], state: &mut OptimizerState<F>, cfg: &OptimizerConfig) -> Result<()> {
    check_lengths(params, grads)?;
    check_lengths(params, &state.mean_square)?;
    check_lengths(params, &state.momentum)?;
    check_grads(grads)?;
    let (lr, decay, eps) = (F::of(cfg.learning_rate), F::of(cfg.rms_decay), F::of(cfg.epsilon));
    let eta = F::of(cfg.momentum_decay);
    let (keep, keep_mom) = (F::one() - decay, F::one() - eta);
    let iter = params.iter_mut().zip(grads).zip(&mut state.mean_square).zip(&mut state.momentum);
    for (((w, &g), ms), mom) in iter {
        *mom = eta * *mom + keep_mom * g;
        *ms = decay * *ms + keep * g * g;
        let radicand = (*ms - *mom * *mom).max(F::zero()) + eps;
        *w -= lr * g / radicand.sqrt();
    }
    check_params(params)
}

/// A configured stepper with its preallocated state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer<F> {
    pub config: OptimizerConfig,
    pub state: OptimizerState<F>,
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(config: OptimizerConfig, num_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, state: OptimizerState::new(config.variant, num_params) })
    }

    pub fn step(&mut self, params: &mut [F], grads: &[F]) -> Result<()> {
        match self.config.variant {
            Variant::Sgd => step_sgd(params, grads, &self.config),
            Variant::RmspropHinton => step_rmsprop_hinton(params, grads, &mut self.state, &self.config),
            Variant::RmspropDeepmind => step_rmsprop_deepmind(params, grads, &mut self.state, &self.config),
        }
    }
}
