//! Spatial buffers around humans and the intrusion cost derived from them.
//!
//! Each human contributes one disc around its current position (contact
//! distance plus a fixed discomfort margin) and one disc around each of its
//! first `k_prime` predicted positions (contact distance plus the conformal
//! error radius for that horizon). The intrusion depth is the deepest
//! penetration of the robot center into any of these discs.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::predictor::PredictionSet;
use crate::sim::AgentState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BufferSpec {
    /// Discomfort margin around current human positions (m).
    pub r_disc: f64,
    /// Number of predicted positions that carry a buffer.
    pub k_prime: usize,
    /// Cost per meter of intrusion.
    pub mu: f64,
}

impl Default for BufferSpec {
    fn default() -> Self {
        Self {
            r_disc: 0.25,
            k_prime: 2,
            mu: 1.0,
        }
    }
}

impl BufferSpec {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.r_disc >= 0.0) {
            return Err(Error::Config("buffer.r_disc must be >= 0".into()));
        }
        if self.k_prime < 1 || self.k_prime > horizon {
            return Err(Error::Config(format!(
                "buffer.k_prime must be in 1..={horizon}, got {}",
                self.k_prime
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config("buffer.mu must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntrusionSource {
    None,
    CurrentPosition {
        human: usize,
    },
    /// `step` is the zero-based horizon index.
    Prediction {
        human: usize,
        step: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrusionReport {
    pub depth: f64,
    pub source: IntrusionSource,
}

impl IntrusionReport {
    pub const NONE: IntrusionReport = IntrusionReport {
        depth: 0.0,
        source: IntrusionSource::None,
    };

    pub fn is_intrusion(&self) -> bool {
        self.depth > 0.0
    }
}

/// Threshold radii for the current-position disc and the first `k_prime`
/// prediction discs of one human.
pub fn buffer_radii(r_ego: f64, r_human: f64, spec: &BufferSpec, radii: &[f64]) -> (f64, Vec<f64>) {
    let contact = r_ego + r_human;
    let r1 = contact + spec.r_disc;
    let r2 = radii
        .iter()
        .take(spec.k_prime)
        .map(|d| contact + d)
        .collect();
    (r1, r2)
}

/// Deepest penetration of `robot_pos` into any buffer. Ties keep the first
/// buffer in scan order (human by human, current position before predictions).
pub fn max_intrusion(
    robot_pos: Vec2,
    r_ego: f64,
    humans: &[AgentState],
    predictions: &[PredictionSet],
    spec: &BufferSpec,
) -> IntrusionReport {
    let mut best = IntrusionReport::NONE;
    for (h, (human, pred)) in humans.iter().zip(predictions).enumerate() {
        let (r1, r2) = buffer_radii(r_ego, human.radius, spec, &pred.radii);
        let depth = r1 - robot_pos.distance(human.position);
        if depth > best.depth {
            best = IntrusionReport {
                depth,
                source: IntrusionSource::CurrentPosition { human: h },
            };
        }
        for (k, (point, r)) in pred.points.iter().zip(&r2).enumerate() {
            let depth = r - robot_pos.distance(*point);
            if depth > best.depth {
                best = IntrusionReport {
                    depth,
                    source: IntrusionSource::Prediction { human: h, step: k },
                };
            }
        }
    }
    best
}

pub fn cost(report: &IntrusionReport, spec: &BufferSpec) -> f64 {
    spec.mu * report.depth
}
