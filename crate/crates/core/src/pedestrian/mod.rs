//! Rule-based pedestrian controllers. Both drive simulated humans and double
//! as baseline robot policies.

pub mod linear_program;
pub mod orca;
pub mod social_force;

pub use orca::{orca_velocity, OrcaParams};
pub use social_force::{sf_velocity, SfParams};
