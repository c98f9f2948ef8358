//! Deep Q-learning with experience replay, built to desk scale.
//!
//! The crate is generic over the floating-point element type ([`Scalar`]);
//! `f64` is the reference precision and `f32` the fast path. Concrete aliases
//! for both are exported below.

pub mod agent;
pub mod checkpoint;
pub mod env;
pub mod error;
pub mod mdp;
pub mod neural;
pub mod optim;
pub mod policy;
pub mod proto;
pub mod replay;
pub mod scalar;
pub mod wrappers;

pub use error::{Error, Result};
pub use scalar::{derive_seed, seeded_rng, Rng, Scalar};

pub type QTable64 = mdp::QTable<f64>;
pub type QTable32 = mdp::QTable<f32>;
pub type TabularMdp64 = mdp::TabularMdp<f64>;
pub type QNetwork64 = neural::QNetwork<f64>;
pub type QNetwork32 = neural::QNetwork<f32>;
