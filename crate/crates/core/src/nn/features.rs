//! Robot-centric feature layout fed to the attention networks.
//!
//! Per human: relative position, relative velocity, radius, K predicted
//! points relative to the robot, K conformal radii. Ego: velocity, goal
//! offset, maximum speed, radius.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::sim::Observation;
use std::cmp::Ordering;

pub const EGO_FEATURES: usize = 6;

pub fn human_feature_len(horizon: usize) -> usize {
    5 + 3 * horizon
}

#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub ego: Matrix,
    /// `H x human_feature_len(K)`, rows in canonical order.
    pub humans: Matrix,
    pub v_max: f64,
}

impl Features {
    pub fn n_humans(&self) -> usize {
        self.humans.rows
    }
}

pub fn encode(obs: &Observation, horizon: usize) -> Result<Features> {
    let ego = &obs.ego;
    let p0 = ego.position;
    let goal = ego.goal - p0;
    let ego_row = vec![
        ego.velocity.x,
        ego.velocity.y,
        goal.x,
        goal.y,
        ego.v_max,
        ego.radius,
    ];

    if obs.model.len() != obs.humans.len() {
        return Err(Error::Usage(format!(
            "observation has {} humans but {} prediction sets",
            obs.humans.len(),
            obs.model.len()
        )));
    }
    let width = human_feature_len(horizon);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(obs.humans.len());
    for (h, pred) in obs.humans.iter().zip(&obs.model) {
        if pred.points.len() != horizon || pred.radii.len() != horizon {
            return Err(Error::Usage(format!(
                "prediction set has horizon {} (radii {}), expected {horizon}",
                pred.points.len(),
                pred.radii.len()
            )));
        }
        let rel = h.position - p0;
        let vel = h.velocity - ego.velocity;
        let mut row = Vec::with_capacity(width);
        row.extend([rel.x, rel.y, vel.x, vel.y, h.radius]);
        for q in &pred.points {
            let d = *q - p0;
            row.extend([d.x, d.y]);
        }
        row.extend(&pred.radii);
        rows.push(row);
    }
    // A canonical order makes every downstream floating-point reduction
    // independent of how the humans were listed.
    rows.sort_by(|a, b| lexicographic(a, b));
    let n = rows.len();
    Ok(Features {
        ego: Matrix::row_vector(ego_row),
        humans: Matrix::from_vec(n, width, rows.concat()),
        v_max: ego.v_max,
    })
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
