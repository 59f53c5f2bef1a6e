//! Optimal reciprocal collision avoidance for holonomic disc agents.

use super::linear_program::{self, Line};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sim::AgentState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrcaParams {
    /// Look-ahead window for velocity obstacles, in seconds.
    pub time_horizon: f64,
    /// Neighbours farther than this (center to center) are ignored.
    pub neighbor_dist: f64,
    /// Share of the avoidance effort this agent takes on.
    pub responsibility: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        Self {
            time_horizon: 5.0,
            neighbor_dist: 10.0,
            responsibility: 0.5,
        }
    }
}

impl OrcaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_horizon > 0.0) {
            return Err(Error::Config("orca.time_horizon must be > 0".into()));
        }
        if !(self.neighbor_dist > 0.0) {
            return Err(Error::Config("orca.neighbor_dist must be > 0".into()));
        }
        if !(self.responsibility > 0.0 && self.responsibility <= 1.0) {
            return Err(Error::Config(
                "orca.responsibility must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Rotation applied to the preferred velocity on an exact head-on tie.
pub const TIE_BREAK_ANGLE: f64 = 1e-3;

/// Full speed toward the goal, or zero when already on it.
pub fn preferred_velocity(agent: &AgentState) -> Vec2 {
    (agent.goal - agent.position).normalized() * agent.v_max
}

/// Builds the ORCA half-plane induced by `other` on `agent`'s velocity.
pub fn orca_line(agent: &AgentState, other: &AgentState, params: &OrcaParams, dt: f64) -> Line {
    let rel_pos = other.position - agent.position;
    let rel_vel = agent.velocity - other.velocity;
    let dist_sq = rel_pos.norm_sq();
    let combined = agent.radius + other.radius;
    let combined_sq = combined * combined;
    let inv_horizon = 1.0 / params.time_horizon;

    let (direction, u) = if dist_sq > combined_sq {
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
            // Closest boundary point is on the truncation circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w * (1.0 / w_len);
            (
                Vec2::new(unit_w.y, -unit_w.x),
                unit_w * (combined * inv_horizon - w_len),
            )
        } else {
            // Closest boundary point is on one of the cone legs. A zero
            // determinant (exactly head-on) resolves to the right leg.
            let leg = (dist_sq - combined_sq).sqrt();
            let direction = if rel_pos.det(w) > 0.0 {
                Vec2::new(
                    rel_pos.x * leg - rel_pos.y * combined,
                    rel_pos.x * combined + rel_pos.y * leg,
                ) * (1.0 / dist_sq)
            } else {
                -Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined,
                    -rel_pos.x * combined + rel_pos.y * leg,
                ) * (1.0 / dist_sq)
            };
            let along = rel_vel.dot(direction);
            (direction, direction * along - rel_vel)
        }
    } else {
        // Already overlapping: resolve within one time step.
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 {
            w * (1.0 / w_len)
        } else {
            Vec2::new(1.0, 0.0)
        };
        (
            Vec2::new(unit_w.y, -unit_w.x),
            unit_w * (combined * inv_dt - w_len),
        )
    };

    Line {
        point: agent.velocity + u * params.responsibility,
        direction,
    }
}

/// New velocity for `agent` given the surrounding agents.
///
/// Neighbours are considered nearest first (ties keep input order), so the
/// result is a deterministic function of the inputs. The returned speed never
/// exceeds `agent.v_max`.
pub fn orca_velocity(
    agent: &AgentState,
    neighbors: &[AgentState],
    params: &OrcaParams,
    dt: f64,
) -> Vec2 {
    let mut preferred = preferred_velocity(agent);
    let range_sq = params.neighbor_dist * params.neighbor_dist;
    let mut near: Vec<(f64, usize)> = neighbors
        .iter()
        .enumerate()
        .map(|(i, n)| ((n.position - agent.position).norm_sq(), i))
        .filter(|&(d, _)| d < range_sq)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // A neighbour exactly on the goal line gives a velocity obstacle that is
    // symmetric about the preferred velocity, and the pair just brakes into
    // each other. Veer right by a hair to pick a side.
    let blocked = near.iter().any(|&(_, i)| {
        let rel = neighbors[i].position - agent.position;
        rel.det(preferred) == 0.0 && rel.dot(preferred) > 0.0
    });
    if blocked {
        let (s, c) = TIE_BREAK_ANGLE.sin_cos();
        preferred = Vec2::new(
            c * preferred.x + s * preferred.y,
            c * preferred.y - s * preferred.x,
        );
    }

    let lines: Vec<Line> = near
        .iter()
        .map(|&(_, i)| orca_line(agent, &neighbors[i], params, dt))
        .collect();
    linear_program::solve(&lines, agent.v_max, preferred).clamp_norm(agent.v_max)
}
