//! Isotropic Gaussian action distribution with a fixed standard deviation.

use crate::Vec2;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{E, PI};

pub fn log_prob(action: Vec2, mean: Vec2, std: f64) -> f64 {
    let d = action - mean;
    -d.norm_sq() / (2.0 * std * std) - (2.0 * PI * std * std).ln()
}

/// Depends on `std` alone, so it stays constant while the policy trains.
pub fn entropy(std: f64) -> f64 {
    (2.0 * PI * E * std * std).ln()
}

pub fn sample<R: Rng + ?Sized>(mean: Vec2, std: f64, rng: &mut R) -> Vec2 {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    mean + Vec2::new(nx, ny) * std
}

pub fn sample_with_log_prob<R: Rng + ?Sized>(mean: Vec2, std: f64, rng: &mut R) -> (Vec2, f64) {
    let a = sample(mean, std, rng);
    (a, log_prob(a, mean, std))
}
