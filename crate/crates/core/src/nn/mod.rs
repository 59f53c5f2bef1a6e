//! Attention actor-critic, its gradients, and the pieces around it.

pub mod checkpoint;
pub mod features;
pub mod gaussian;
pub mod gradcheck;
pub mod matrix;
pub mod network;
pub mod optim;
pub mod tape;

pub use checkpoint::Checkpoint;
pub use features::{encode, Features};
pub use matrix::Matrix;
pub use network::{ActorCritic, Gradient, LossBreakdown, LossSpec, NetworkConfig, Output, Sample};
pub use optim::{Adam, AdamConfig};
