//! Crowd navigation with online conformal uncertainty and
//! Lagrangian-constrained policy optimisation.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: seedable crowd environment (robot, pedestrians, reward, cost)
//! - [`pedestrian`]: ORCA and social-force controllers
//! - [`predictor`]: constant-velocity trajectory prediction
//! - [`dtaci`]: multi-expert adaptive conformal error radii
//! - [`buffer`]: spatial buffers and intrusion cost
//! - [`nn`]: attention actor-critic with in-repo reverse-mode gradients
//! - [`trainer`]: PPO with a Lagrange multiplier on episode intrusion cost
//! - [`eval`]: metrics, evaluation protocols, coverage reports, dumps

pub mod buffer;
pub mod config;
pub mod dtaci;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod pedestrian;
pub mod predictor;
pub mod seeding;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::Vec2;
