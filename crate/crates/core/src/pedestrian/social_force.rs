//! Social-force pedestrian model: goal-directed relaxation plus exponential
//! repulsion between agents.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sim::AgentState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfParams {
    pub relaxation_time: f64,
    pub repulsion_strength: f64,
    pub repulsion_range: f64,
}

impl Default for SfParams {
    fn default() -> Self {
        Self {
            relaxation_time: 0.5,
            repulsion_strength: 2.0,
            repulsion_range: 0.3,
        }
    }
}

impl SfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation_time > 0.0
            && self.repulsion_strength > 0.0
            && self.repulsion_range > 0.0)
        {
            return Err(Error::Config(
                "social force parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Repulsion felt by `agent` from `other`. Coincident centers push along +x.
pub fn repulsion(agent: &AgentState, other: &AgentState, params: &SfParams) -> Vec2 {
    let offset = agent.position - other.position;
    let dist = offset.norm();
    let away = if dist > 0.0 {
        offset * (1.0 / dist)
    } else {
        Vec2::new(1.0, 0.0)
    };
    let magnitude = params.repulsion_strength
        * ((agent.radius + other.radius - dist) / params.repulsion_range).exp();
    away * magnitude
}

/// Total force acting on `agent`.
pub fn social_force(agent: &AgentState, neighbors: &[AgentState], params: &SfParams) -> Vec2 {
    let desired = (agent.goal - agent.position).normalized() * agent.v_max;
    let mut force = (desired - agent.velocity) * (1.0 / params.relaxation_time);
    for other in neighbors {
        force += repulsion(agent, other, params);
    }
    force
}

/// Velocity after integrating the social force over `dt`, capped at `v_max`.
pub fn sf_velocity(
    agent: &AgentState,
    neighbors: &[AgentState],
    params: &SfParams,
    dt: f64,
) -> Vec2 {
    (agent.velocity + social_force(agent, neighbors, params) * dt).clamp_norm(agent.v_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker(px: f64, py: f64, vx: f64, vy: f64) -> AgentState {
        AgentState {
            position: Vec2::new(px, py),
            velocity: Vec2::new(vx, vy),
            radius: 0.3,
            goal: Vec2::new(10.0, 0.0),
            v_max: 1.0,
        }
    }

    #[test]
    fn equilibrium_without_neighbors() {
        let a = walker(0.0, 0.0, 1.0, 0.0);
        let p = SfParams::default();
        assert_eq!(social_force(&a, &[], &p), Vec2::ZERO);
        assert_eq!(sf_velocity(&a, &[], &p, 0.25), a.velocity);
    }

    #[test]
    fn neighbor_ahead_pushes_straight_back() {
        let p = SfParams::default();
        let a = walker(0.0, 0.0, 1.0, 0.0);
        let b = walker(1.0, 0.0, 0.0, 0.0);
        let rep = repulsion(&a, &b, &p);
        // Hand evaluation: 2.0 * exp((0.6 - 1.0) / 0.3) along -x.
        let expected = 2.0 * ((0.6f64 - 1.0) / 0.3).exp();
        assert!((rep.x + expected).abs() < 1e-12);
        assert_eq!(rep.y, 0.0);
        let v = sf_velocity(&a, &[b], &p, 0.25);
        assert_eq!(v.y, 0.0);
        assert!(v.x < 1.0);
        assert!((v.x - (1.0 - 0.25 * expected)).abs() < 1e-12);
    }

    #[test]
    fn forces_superpose() {
        let p = SfParams::default();
        let a = walker(0.0, 0.0, 0.5, 0.2);
        let b = walker(0.8, 0.4, 0.0, 0.0);
        let c = walker(-0.3, -0.9, 0.0, 0.0);
        let both = social_force(&a, &[b, c], &p);
        let drive = social_force(&a, &[], &p);
        let sum = drive + repulsion(&a, &b, &p) + repulsion(&a, &c, &p);
        assert!((both - sum).norm() < 1e-12);
    }

    #[test]
    fn coincident_centers_use_fixed_direction() {
        let p = SfParams::default();
        let a = walker(1.0, 1.0, 0.0, 0.0);
        let rep = repulsion(&a, &a, &p);
        assert!(rep.x > 0.0 && rep.y == 0.0);
    }

    #[test]
    fn speed_is_capped() {
        let p = SfParams::default();
        let a = walker(0.0, 0.0, 0.9, 0.0);
        let b = walker(-0.2, 0.0, 0.0, 0.0);
        assert!(sf_velocity(&a, &[b], &p, 0.25).norm() <= 1.0 + 1e-12);
    }
}
