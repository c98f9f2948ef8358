//! Convolutional Q-network with hand-written forward and backward passes.

pub mod gradcheck;
mod kernels;
mod network;
mod tensor;
mod topology;

pub use kernels::{set_simd_enabled, simd_level_name};
pub use network::{GradientBuffer, InitScheme, ParamSnapshot, QNetwork, Workspace};
pub use tensor::Tensor;
pub use topology::{LayerSpec, Topology};
