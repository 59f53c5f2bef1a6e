//! Environments the trainer can drive.

use crate::buffer::IntrusionReport;
use crate::error::Result;
use crate::sim::{AgentState, CrowdEnv, Observation, Outcome, StepResult};
use crate::Vec2;

pub trait Environment {
    fn reset(&mut self, seed: u64) -> Result<Observation>;
    fn step(&mut self, action: Vec2) -> Result<StepResult>;
}

impl Environment for CrowdEnv {
    fn reset(&mut self, seed: u64) -> Result<Observation> {
        CrowdEnv::reset(self, seed)
    }

    fn step(&mut self, action: Vec2) -> Result<StepResult> {
        CrowdEnv::step(self, action)
    }
}

/// One-step constrained bandit: the action's x component, clamped to
/// `[0, 1]`, is paid out as both reward and cost. Under a cost limit `d`
/// the constrained optimum is `a = d`.
#[derive(Debug, Clone, Default)]
pub struct ToyCmdp;

impl ToyCmdp {
    pub fn observation() -> Observation {
        Observation {
            ego: AgentState {
                position: Vec2::ZERO,
                velocity: Vec2::ZERO,
                radius: 0.2,
                goal: Vec2::new(1.0, 0.0),
                v_max: 1.0,
            },
            humans: Vec::new(),
            model: Vec::new(),
        }
    }
}

impl Environment for ToyCmdp {
    fn reset(&mut self, _seed: u64) -> Result<Observation> {
        Ok(Self::observation())
    }

    fn step(&mut self, action: Vec2) -> Result<StepResult> {
        let a = action.x.clamp(0.0, 1.0);
        Ok(StepResult {
            observation: Self::observation(),
            reward: a,
            cost: a,
            done: true,
            outcome: Outcome::Success,
            intrusion: IntrusionReport::NONE,
        })
    }
}
