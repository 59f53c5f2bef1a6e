use super::scenario::{sample_scenario, uniform_point};
use super::{AgentState, EnvConfig, Observation, Outcome, PedestrianModel};
use crate::buffer::{self, IntrusionReport};
use crate::dtaci::EstimatorBank;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pedestrian::{orca_velocity, sf_velocity};
use crate::predictor::{prediction_error, ConstantVelocity, PredictionSet, TrajectoryPredictor};
use crate::seeding::{derive_seed, streams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub intrusion: IntrusionReport,
}

/// One realised prediction error, paired with the radius that was attached
/// to the prediction when it was made.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub human: usize,
    /// One-based horizon.
    pub k: usize,
    pub actual: f64,
    pub radius: f64,
}

/// Strictly inside the goal region.
pub fn check_goal(robot: &AgentState, goal_tolerance: f64) -> bool {
    robot.position.distance(robot.goal) < robot.radius + goal_tolerance
}

pub struct CrowdEnv {
    config: EnvConfig,
    predictor: Box<dyn TrajectoryPredictor + Send>,
    bank: EstimatorBank,
    rng: ChaCha8Rng,
    robot: AgentState,
    humans: Vec<AgentState>,
    /// Prediction sets issued at the most recent steps, newest first.
    history: VecDeque<Vec<PredictionSet>>,
    observation: Observation,
    last_errors: Vec<ErrorSample>,
    last_intrusion: IntrusionReport,
    t: usize,
    outcome: Outcome,
    seed: u64,
}

impl CrowdEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        Self::with_predictor(config, Box::new(ConstantVelocity))
    }

    pub fn with_predictor(
        config: EnvConfig,
        predictor: Box<dyn TrajectoryPredictor + Send>,
    ) -> Result<Self> {
        config.validate()?;
        let bank = EstimatorBank::new(config.dtaci.clone(), 0, 0)?;
        let placeholder = AgentState {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            radius: config.world.robot_radius,
            goal: Vec2::ZERO,
            v_max: config.world.robot_vmax,
        };
        Ok(Self {
            config,
            predictor,
            bank,
            rng: ChaCha8Rng::seed_from_u64(0),
            robot: placeholder,
            humans: Vec::new(),
            history: VecDeque::new(),
            observation: Observation {
                ego: placeholder,
                humans: Vec::new(),
                model: Vec::new(),
            },
            last_errors: Vec::new(),
            last_intrusion: IntrusionReport::NONE,
            t: 0,
            // Not stepped until reset.
            outcome: Outcome::Timeout,
            seed: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Starts a new episode laid out by `seed`. Conformal state is restored
    /// to the configured initial errors.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let scenario = sample_scenario(&self.config.world, seed)?;
        self.seed = seed;
        self.robot = scenario.robot;
        self.humans = scenario.humans;
        self.rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::DYNAMICS));
        self.bank.reset(self.humans.len());
        self.bank.reseed(derive_seed(seed, streams::CONFORMAL));
        self.history.clear();
        self.last_errors.clear();
        self.t = 0;
        self.outcome = Outcome::Running;
        self.observation = self.build_observation();
        self.last_intrusion = self.intrusion_of(&self.observation);
        Ok(self.observation.clone())
    }

    /// Predicts every human's next `K` positions and draws their conformal
    /// radii. The prediction set is remembered for later error scoring.
    fn build_observation(&mut self) -> Observation {
        let k = self.config.prediction_horizon;
        let dt = self.config.world.dt;
        let mut model = Vec::with_capacity(self.humans.len());
        for (h, human) in self.humans.iter().enumerate() {
            let points = self.predictor.predict(human, k, dt);
            let radii = (0..k).map(|j| self.bank.sample_radius(h, j)).collect();
            model.push(PredictionSet { points, radii });
        }
        self.history.push_front(model.clone());
        self.history.truncate(k);
        Observation {
            ego: self.robot,
            humans: self.humans.clone(),
            model,
        }
    }

    fn intrusion_of(&self, obs: &Observation) -> IntrusionReport {
        buffer::max_intrusion(
            obs.ego.position,
            obs.ego.radius,
            &obs.humans,
            &obs.model,
            &self.config.buffer,
        )
    }

    fn human_velocities(&self) -> Vec<Vec2> {
        let world = &self.config.world;
        let mut others: Vec<AgentState> = Vec::with_capacity(self.humans.len().saturating_sub(1));
        (0..self.humans.len())
            .map(|i| {
                others.clear();
                others.extend(
                    self.humans
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, a)| *a),
                );
                let me = &self.humans[i];
                match world.pedestrian_model {
                    PedestrianModel::Orca => orca_velocity(me, &others, &world.orca, world.dt),
                    PedestrianModel::Sf => sf_velocity(me, &others, &world.sf, world.dt),
                }
            })
            .collect()
    }

    fn resample_goals(&mut self) {
        let world = &self.config.world;
        let periodic = self.t % world.goal_resample_period == 0;
        for human in &mut self.humans {
            let arrived = human.position.distance(human.goal) < human.radius;
            let sudden = periodic && self.rng.random::<f64>() < world.goal_resample_prob;
            if arrived || sudden {
                human.goal = uniform_point(&mut self.rng, world.arena_half_extent);
            }
        }
    }

    /// Scores the predictions made `k` steps ago against the realised human
    /// positions and feeds the errors to the conformal bank.
    fn update_conformal(&mut self) -> Result<()> {
        self.last_errors.clear();
        // history[0] is the previous step's prediction set at this point.
        for (age, issued) in self.history.iter().enumerate() {
            let k = age + 1;
            for (h, (pred, human)) in issued.iter().zip(&self.humans).enumerate() {
                let actual = prediction_error(pred.points[k - 1], human.position);
                self.last_errors.push(ErrorSample {
                    human: h,
                    k,
                    actual,
                    radius: pred.radii[k - 1],
                });
            }
        }
        for e in &self.last_errors {
            self.bank.observe_and_update(e.human, e.k - 1, e.actual)?;
        }
        Ok(())
    }

    pub fn step(&mut self, action: Vec2) -> Result<StepResult> {
        if self.outcome.is_done() {
            return Err(Error::Usage(
                "step called on a finished episode; call reset".into(),
            ));
        }
        if !action.is_finite() {
            return Err(Error::Usage(format!("non-finite action {action:?}")));
        }
        let world = &self.config.world;
        let dt = world.dt;
        let previous_distance = self.robot.distance_to_goal();

        let applied = action.clamp_norm(self.robot.v_max);
        self.robot.velocity = applied;
        self.robot.position += applied * dt;

        let velocities = self.human_velocities();
        for (human, v) in self.humans.iter_mut().zip(velocities) {
            human.velocity = v;
            human.position += v * dt;
        }
        self.t += 1;
        self.resample_goals();
        self.update_conformal()?;

        self.observation = self.build_observation();
        let intrusion = self.intrusion_of(&self.observation);
        self.last_intrusion = intrusion;
        let cost = buffer::cost(&intrusion, &self.config.buffer);

        let world = &self.config.world;
        let collided = self
            .humans
            .iter()
            .any(|h| self.robot.position.distance(h.position) < self.robot.radius + h.radius);
        let potential =
            world.reward.potential_weight * (previous_distance - self.robot.distance_to_goal());
        let (outcome, reward) = if collided {
            (Outcome::Collision, world.reward.collision)
        } else if check_goal(&self.robot, world.goal_tolerance) {
            (Outcome::Success, world.reward.success)
        } else if self.t >= world.max_steps {
            (Outcome::Timeout, potential)
        } else {
            (Outcome::Running, potential)
        };
        self.outcome = outcome;

        Ok(StepResult {
            observation: self.observation.clone(),
            reward,
            cost,
            done: outcome.is_done(),
            outcome,
            intrusion,
        })
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn robot(&self) -> &AgentState {
        &self.robot
    }

    pub fn humans(&self) -> &[AgentState] {
        &self.humans
    }

    pub fn bank(&self) -> &EstimatorBank {
        &self.bank
    }

    /// Prediction errors scored during the last step.
    pub fn last_errors(&self) -> &[ErrorSample] {
        &self.last_errors
    }

    pub fn last_intrusion(&self) -> IntrusionReport {
        self.last_intrusion
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::WorldConfig;

    fn quiet_config() -> EnvConfig {
        EnvConfig {
            world: WorldConfig {
                n_humans: 0,
                ..WorldConfig::default()
            },
            ..EnvConfig::default()
        }
    }

    #[test]
    fn zero_action_holds_position() {
        let mut env = CrowdEnv::new(quiet_config()).unwrap();
        let obs = env.reset(3).unwrap();
        let r = env.step(Vec2::ZERO).unwrap();
        assert_eq!(r.observation.ego.position, obs.ego.position);
        assert_eq!(r.outcome, Outcome::Running);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn holonomic_integration() {
        let mut env = CrowdEnv::new(quiet_config()).unwrap();
        let obs = env.reset(3).unwrap();
        let r = env.step(Vec2::new(1.0, 0.0)).unwrap();
        assert!((r.observation.ego.position.x - obs.ego.position.x - 0.25).abs() < 1e-12);
        assert_eq!(r.observation.ego.position.y, obs.ego.position.y);
    }

    #[test]
    fn action_is_clamped() {
        let mut env = CrowdEnv::new(quiet_config()).unwrap();
        env.reset(3).unwrap();
        let r = env.step(Vec2::new(3.0, 4.0)).unwrap();
        assert!((r.observation.ego.velocity.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_reward_is_progress() {
        let mut env = CrowdEnv::new(quiet_config()).unwrap();
        let obs = env.reset(8).unwrap();
        let dir = (obs.ego.goal - obs.ego.position).normalized();
        let r = env.step(dir).unwrap();
        assert!((r.reward - 2.0 * 0.25).abs() < 1e-9);
    }

    #[test]
    fn collision_ends_episode() {
        let mut env = CrowdEnv::new(EnvConfig::default()).unwrap();
        env.reset(1).unwrap();
        // Teleport a human onto the robot's next position.
        let target = env.robot.position;
        env.humans[0].position = target;
        env.humans[0].goal = target;
        let r = env.step(Vec2::ZERO).unwrap();
        assert_eq!(r.outcome, Outcome::Collision);
        assert_eq!(r.reward, -20.0);
        assert!(r.done);
        assert!(matches!(env.step(Vec2::ZERO), Err(Error::Usage(_))));
    }

    #[test]
    fn goal_threshold_is_strict() {
        let mut robot = AgentState {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            radius: 0.2,
            goal: Vec2::ZERO,
            v_max: 1.0,
        };
        assert!(check_goal(&robot, 0.1));
        robot.goal = Vec2::new(0.2 + 0.1 + 0.01, 0.0);
        assert!(!check_goal(&robot, 0.1));
        robot.goal = Vec2::new(0.5, 0.0);
        assert!(!check_goal(&robot, 0.3));
    }

    #[test]
    fn reaches_goal_when_driving_straight() {
        let mut env = CrowdEnv::new(quiet_config()).unwrap();
        env.reset(4).unwrap();
        let mut last = None;
        for _ in 0..200 {
            let r = env.robot;
            let step = (r.goal - r.position).clamp_norm(r.v_max * 0.25) * 4.0;
            let res = env.step(step).unwrap();
            if res.done {
                last = Some(res);
                break;
            }
        }
        let res = last.unwrap();
        assert_eq!(res.outcome, Outcome::Success);
        assert_eq!(res.reward, 10.0);
    }

    #[test]
    fn timeout_after_max_steps() {
        let mut cfg = quiet_config();
        cfg.world.max_steps = 3;
        let mut env = CrowdEnv::new(cfg).unwrap();
        env.reset(0).unwrap();
        assert_eq!(env.step(Vec2::ZERO).unwrap().outcome, Outcome::Running);
        assert_eq!(env.step(Vec2::ZERO).unwrap().outcome, Outcome::Running);
        assert_eq!(env.step(Vec2::ZERO).unwrap().outcome, Outcome::Timeout);
    }

    #[test]
    fn fresh_radii_are_initial_errors() {
        let mut env = CrowdEnv::new(EnvConfig::default()).unwrap();
        let obs = env.reset(12).unwrap();
        assert_eq!(obs.model.len(), 20);
        for p in &obs.model {
            assert_eq!(p.points.len(), 5);
            assert_eq!(p.radii, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        }
    }

    #[test]
    fn errors_scored_only_for_existing_predictions() {
        let mut env = CrowdEnv::new(EnvConfig::default()).unwrap();
        env.reset(2).unwrap();
        for t in 1..=7 {
            env.step(Vec2::ZERO).unwrap();
            assert_eq!(env.last_errors().len(), 20 * t.min(5));
        }
    }

    #[test]
    fn speeds_respect_limits() {
        let mut env = CrowdEnv::new(EnvConfig::default()).unwrap();
        env.reset(21).unwrap();
        for _ in 0..60 {
            let r = env.step(Vec2::new(0.3, 2.0)).unwrap();
            assert!(r.observation.ego.speed() <= 1.0 + 1e-9);
            for h in &r.observation.humans {
                assert!(h.speed() <= h.v_max + 1e-9);
            }
            if r.done {
                break;
            }
        }
    }
}
