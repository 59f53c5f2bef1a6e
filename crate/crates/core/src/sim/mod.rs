//! Crowd-navigation environment: a holonomic disc robot crossing a square
//! arena populated by pedestrians that ignore it.

mod env;
mod scenario;

pub use env::{check_goal, CrowdEnv, ErrorSample, StepResult};
pub use scenario::{sample_scenario, Scenario};

use crate::buffer::BufferSpec;
use crate::dtaci::DtaciConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pedestrian::{OrcaParams, SfParams};
use crate::predictor::PredictionSet;
use serde::{Deserialize, Serialize};

/// Kinematic state of one disc agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub v_max: f64,
}

impl AgentState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn distance_to_goal(&self) -> f64 {
        self.position.distance(self.goal)
    }

    /// Translated copy, used for frame-invariance checks.
    pub fn translated(&self, offset: Vec2) -> AgentState {
        AgentState {
            position: self.position + offset,
            goal: self.goal + offset,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PedestrianModel {
    Orca,
    Sf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub success: f64,
    pub collision: f64,
    /// Reward per meter of progress toward the goal.
    pub potential_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            success: 10.0,
            collision: -20.0,
            potential_weight: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// The arena is `[-half, half]^2`.
    pub arena_half_extent: f64,
    pub n_humans: usize,
    pub robot_radius: f64,
    pub human_radius_range: [f64; 2],
    pub human_vmax_range: [f64; 2],
    pub robot_vmax: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub goal_min_distance: f64,
    pub goal_tolerance: f64,
    pub goal_resample_prob: f64,
    pub goal_resample_period: usize,
    pub rushing_fraction: f64,
    pub rushing_vmax: f64,
    /// Extra clearance between agents at spawn time, on top of the radii.
    pub spawn_margin: f64,
    pub pedestrian_model: PedestrianModel,
    pub reward: RewardConfig,
    pub orca: OrcaParams,
    pub sf: SfParams,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena_half_extent: 6.0,
            n_humans: 20,
            robot_radius: 0.2,
            human_radius_range: [0.3, 0.5],
            human_vmax_range: [0.5, 1.5],
            robot_vmax: 1.0,
            dt: 0.25,
            max_steps: 200,
            goal_min_distance: 8.0,
            goal_tolerance: 0.1,
            goal_resample_prob: 0.5,
            goal_resample_period: 5,
            rushing_fraction: 0.0,
            rushing_vmax: 2.0,
            spawn_margin: 0.2,
            pedestrian_model: PedestrianModel::Orca,
            reward: RewardConfig::default(),
            orca: OrcaParams::default(),
            sf: SfParams::default(),
        }
    }
}

fn ordered(range: [f64; 2]) -> bool {
    range[0] <= range[1]
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.arena_half_extent > 0.0) {
            return fail("world.arena_half_extent must be > 0");
        }
        if !(self.robot_radius > 0.0 && self.robot_vmax > 0.0) {
            return fail("world.robot_radius and world.robot_vmax must be > 0");
        }
        if !ordered(self.human_radius_range) || !(self.human_radius_range[0] > 0.0) {
            return fail("world.human_radius_range must be ordered and positive");
        }
        if !ordered(self.human_vmax_range) || !(self.human_vmax_range[0] > 0.0) {
            return fail("world.human_vmax_range must be ordered and positive");
        }
        if !(self.dt > 0.0) || self.max_steps == 0 {
            return fail("world.dt and world.max_steps must be > 0");
        }
        for (name, p) in [
            ("goal_resample_prob", self.goal_resample_prob),
            ("rushing_fraction", self.rushing_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("world.{name} must be in [0, 1]")));
            }
        }
        if self.goal_resample_period == 0 {
            return fail("world.goal_resample_period must be > 0");
        }
        if !(self.rushing_vmax > 0.0)
            || !(self.goal_tolerance >= 0.0)
            || !(self.spawn_margin >= 0.0)
        {
            return fail("world.rushing_vmax must be > 0; goal_tolerance and spawn_margin >= 0");
        }
        if self.goal_min_distance > 2.0 * std::f64::consts::SQRT_2 * self.arena_half_extent {
            return fail("world.goal_min_distance exceeds the arena diagonal");
        }
        self.orca.validate()?;
        self.sf.validate()
    }

    /// Number of humans that receive `rushing_vmax`.
    pub fn rushing_count(&self) -> usize {
        (self.rushing_fraction * self.n_humans as f64).round() as usize
    }
}

/// Named test-time variations of a world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    InDistribution,
    /// 20% of humans walk at up to 2.0 m/s.
    Rushing,
    /// Pedestrians follow the social-force model instead of ORCA.
    SocialForce,
}

impl Preset {
    pub fn apply(self, world: &mut WorldConfig) {
        match self {
            Preset::InDistribution => {}
            Preset::Rushing => {
                world.rushing_fraction = 0.2;
                world.rushing_vmax = 2.0;
            }
            Preset::SocialForce => world.pedestrian_model = PedestrianModel::Sf,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_distribution" | "id" => Ok(Preset::InDistribution),
            "rushing" => Ok(Preset::Rushing),
            "sf" | "social_force" => Ok(Preset::SocialForce),
            other => Err(Error::Usage(format!("unknown preset `{other}`"))),
        }
    }
}

/// Everything a single environment instance needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub world: WorldConfig,
    /// Number of predicted steps per human.
    pub prediction_horizon: usize,
    pub dtaci: DtaciConfig,
    pub buffer: BufferSpec,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            prediction_horizon: 5,
            dtaci: DtaciConfig::default(),
            buffer: BufferSpec::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.dtaci.validate()?;
        if self.prediction_horizon == 0 {
            return Err(Error::Config("prediction_horizon must be >= 1".into()));
        }
        if self.dtaci.horizon() != self.prediction_horizon {
            return Err(Error::Config(format!(
                "dtaci.initial_errors has {} entries but prediction_horizon is {}",
                self.dtaci.horizon(),
                self.prediction_horizon
            )));
        }
        self.buffer.validate(self.prediction_horizon)
    }
}

/// What the planner sees: robot state, human states, and per-human
/// predictions with their conformal radii. Human order is fixed within an
/// episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ego: AgentState,
    pub humans: Vec<AgentState>,
    pub model: Vec<PredictionSet>,
}

impl Observation {
    pub fn translated(&self, offset: Vec2) -> Observation {
        Observation {
            ego: self.ego.translated(offset),
            humans: self.humans.iter().map(|h| h.translated(offset)).collect(),
            model: self
                .model
                .iter()
                .map(|p| PredictionSet {
                    points: p.points.iter().map(|&q| q + offset).collect(),
                    radii: p.radii.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn is_done(self) -> bool {
        self != Outcome::Running
    }
}
