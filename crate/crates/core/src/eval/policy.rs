//! Robot controllers used for evaluation.

use crate::error::{Error, Result};
use crate::nn::ActorCritic;
use crate::pedestrian::{orca_velocity, sf_velocity, OrcaParams, SfParams};
use crate::sim::Observation;
use crate::Vec2;
use std::str::FromStr;

pub trait RobotPolicy {
    fn act(&mut self, obs: &Observation) -> Result<Vec2>;

    fn name(&self) -> String;
}

/// The trained network, acting with its mean action (no exploration noise).
pub struct NetworkPolicy {
    pub net: ActorCritic,
}

impl RobotPolicy for NetworkPolicy {
    fn act(&mut self, obs: &Observation) -> Result<Vec2> {
        Ok(self.net.forward(obs)?.action_mean)
    }

    fn name(&self) -> String {
        "network".into()
    }
}

/// ORCA against the humans. They do not react to the robot, so it takes
/// full responsibility for every avoidance.
pub struct OrcaRobot {
    pub params: OrcaParams,
    pub dt: f64,
}

impl OrcaRobot {
    pub fn new(dt: f64) -> Self {
        Self {
            params: OrcaParams {
                responsibility: 1.0,
                ..OrcaParams::default()
            },
            dt,
        }
    }
}

impl RobotPolicy for OrcaRobot {
    fn act(&mut self, obs: &Observation) -> Result<Vec2> {
        Ok(orca_velocity(&obs.ego, &obs.humans, &self.params, self.dt))
    }

    fn name(&self) -> String {
        "orca".into()
    }
}

pub struct SfRobot {
    pub params: SfParams,
    pub dt: f64,
}

impl RobotPolicy for SfRobot {
    fn act(&mut self, obs: &Observation) -> Result<Vec2> {
        Ok(sf_velocity(&obs.ego, &obs.humans, &self.params, self.dt))
    }

    fn name(&self) -> String {
        "sf".into()
    }
}

/// Heads straight for the goal, slowing so as not to overshoot it.
pub struct GoalSeeker {
    pub dt: f64,
}

impl RobotPolicy for GoalSeeker {
    fn act(&mut self, obs: &Observation) -> Result<Vec2> {
        let to_goal = obs.ego.goal - obs.ego.position;
        let speed = obs.ego.v_max.min(to_goal.norm() / self.dt);
        Ok(to_goal.normalized() * speed)
    }

    fn name(&self) -> String {
        "goal_seeker".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Orca,
    Sf,
}

impl Baseline {
    pub fn build(self, dt: f64) -> Box<dyn RobotPolicy> {
        match self {
            Baseline::Orca => Box::new(OrcaRobot::new(dt)),
            Baseline::Sf => Box::new(SfRobot {
                params: SfParams::default(),
                dt,
            }),
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orca" => Ok(Baseline::Orca),
            "sf" => Ok(Baseline::Sf),
            other => Err(Error::Usage(format!(
                "unknown baseline policy `{other}` (expected orca or sf)"
            ))),
        }
    }
}
