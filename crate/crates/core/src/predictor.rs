//! Multi-step human trajectory prediction.

use crate::geometry::Vec2;
use crate::sim::AgentState;
use serde::{Deserialize, Serialize};

/// Predicted future positions of one human together with the conformal error
/// radius attached to each horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub points: Vec<Vec2>,
    pub radii: Vec<f64>,
}

impl PredictionSet {
    pub fn horizon(&self) -> usize {
        self.points.len()
    }
}

pub trait TrajectoryPredictor {
    /// Positions at `1..=horizon` steps of length `dt` into the future.
    fn predict(&self, human: &AgentState, horizon: usize, dt: f64) -> Vec<Vec2>;
}

/// Extrapolates the current velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl TrajectoryPredictor for ConstantVelocity {
    fn predict(&self, human: &AgentState, horizon: usize, dt: f64) -> Vec<Vec2> {
        predict_cv(human, horizon, dt)
    }
}

pub fn predict_cv(human: &AgentState, horizon: usize, dt: f64) -> Vec<Vec2> {
    (1..=horizon)
        .map(|k| human.position + human.velocity * (k as f64 * dt))
        .collect()
}

/// Euclidean distance between a predicted and a realised position.
pub fn prediction_error(predicted: Vec2, actual: Vec2) -> f64 {
    predicted.distance(actual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn human(p: Vec2, v: Vec2) -> AgentState {
        AgentState {
            position: p,
            velocity: v,
            radius: 0.3,
            goal: Vec2::ZERO,
            v_max: 2.0,
        }
    }

    #[test]
    fn cv_extrapolates_linearly() {
        let pts = predict_cv(&human(Vec2::ZERO, Vec2::new(1.0, 0.0)), 5, 0.25);
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75, 1.0, 1.25]);
        assert!(pts.iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn cv_zero_velocity_stays_put() {
        let p = Vec2::new(1.5, -2.0);
        assert!(predict_cv(&human(p, Vec2::ZERO), 4, 0.25)
            .iter()
            .all(|&q| q == p));
    }

    #[test]
    fn cv_mirror() {
        let up = predict_cv(&human(Vec2::ZERO, Vec2::new(0.0, 1.0)), 5, 0.25);
        let down = predict_cv(&human(Vec2::ZERO, Vec2::new(0.0, -1.0)), 5, 0.25);
        for (k, (u, d)) in up.iter().zip(&down).enumerate() {
            assert_eq!(d.y, -0.25 * (k + 1) as f64);
            assert_eq!(u.mirror_x(), *d);
        }
    }

    #[test]
    fn error_is_euclidean() {
        assert_eq!(prediction_error(Vec2::ZERO, Vec2::ZERO), 0.0);
        assert_eq!(prediction_error(Vec2::ZERO, Vec2::new(3.0, 4.0)), 5.0);
        assert_eq!(prediction_error(Vec2::new(3.0, 4.0), Vec2::ZERO), 5.0);
    }

    proptest! {
        #[test]
        fn cv_prefix_consistent(px in -10.0..10.0f64, py in -10.0..10.0f64, vx in -2.0..2.0f64,
                                vy in -2.0..2.0f64, k in 1usize..8, extra in 0usize..5) {
            let h = human(Vec2::new(px, py), Vec2::new(vx, vy));
            let long = predict_cv(&h, k + extra, 0.25);
            let short = predict_cv(&h, k, 0.25);
            prop_assert_eq!(&long[..k], &short[..]);
        }

        #[test]
        fn error_translation_invariant(ax in -5.0..5.0f64, ay in -5.0..5.0f64, bx in -5.0..5.0f64,
                                       by in -5.0..5.0f64, tx in -5.0..5.0f64, ty in -5.0..5.0f64) {
            let a = Vec2::new(ax, ay);
            let b = Vec2::new(bx, by);
            let t = Vec2::new(tx, ty);
            prop_assert!((prediction_error(a, b) - prediction_error(a + t, b + t)).abs() < 1e-12);
        }
    }
}
