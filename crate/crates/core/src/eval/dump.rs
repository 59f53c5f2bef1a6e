//! JSONL trajectory dumps and exact replay.
//!
//! The first line is a header with the environment config, the seed and the
//! initial state; every further line is one step, recorded after the
//! environment has advanced.

use super::metrics::{surface_separation, EpisodeMetrics};
use super::policy::RobotPolicy;
use super::runner::run_episode;
use crate::buffer::{self, IntrusionReport};
use crate::error::{Error, Result};
use crate::predictor::PredictionSet;
use crate::sim::{AgentState, CrowdEnv, EnvConfig, Outcome};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub policy: String,
    pub seed: u64,
    pub config: EnvConfig,
    pub robot: AgentState,
    pub humans: Vec<AgentState>,
    pub predictions: Vec<PredictionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Action requested by the policy, before the speed clamp.
    pub action: Vec2,
    pub robot: AgentState,
    pub humans: Vec<AgentState>,
    /// Predicted points and conformal radii issued after the step.
    pub predictions: Vec<PredictionSet>,
    pub reward: f64,
    pub cost: f64,
    pub intrusion: IntrusionReport,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(DumpHeader),
    Step(StepRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: DumpHeader,
    pub steps: Vec<StepRecord>,
}

/// Runs one episode and records it. Returns the number of lines written.
pub fn dump_trajectory(
    policy: &mut dyn RobotPolicy,
    env_config: &EnvConfig,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    let traj = record_trajectory(policy, env_config, seed)?;
    write_trajectory(&traj, out)?;
    Ok(traj.steps.len() + 1)
}

pub fn record_trajectory(
    policy: &mut dyn RobotPolicy,
    env_config: &EnvConfig,
    seed: u64,
) -> Result<Trajectory> {
    let mut env = CrowdEnv::new(env_config.clone())?;
    let first = env.reset(seed)?;
    let header = DumpHeader {
        policy: policy.name(),
        seed,
        config: env_config.clone(),
        robot: first.ego,
        humans: first.humans,
        predictions: first.model,
    };
    let mut steps = Vec::new();
    run_episode(&mut env, policy, seed, |_, action, res, env| {
        steps.push(StepRecord {
            t: env.t(),
            action,
            robot: res.observation.ego,
            humans: res.observation.humans.clone(),
            predictions: res.observation.model.clone(),
            reward: res.reward,
            cost: res.cost,
            intrusion: res.intrusion,
            outcome: res.outcome,
        });
    })?;
    Ok(Trajectory { header, steps })
}

pub fn write_trajectory(traj: &Trajectory, out: &Path) -> Result<()> {
    let file = std::fs::File::create(out)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &Record::Header(traj.header.clone()))?;
    w.write_all(b"\n")?;
    for s in &traj.steps {
        serde_json::to_writer(&mut w, &Record::Step(s.clone()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = None;
    let mut steps = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Record>(&line)? {
            Record::Header(h) if header.is_none() => header = Some(h),
            Record::Header(_) => return Err(Error::Usage("dump has more than one header".into())),
            Record::Step(s) => steps.push(s),
        }
    }
    let header = header.ok_or_else(|| Error::Usage("dump has no header record".into()))?;
    Ok(Trajectory { header, steps })
}

/// Re-simulates the dump from its header, feeding the recorded actions,
/// and checks every recorded state bit for bit.
pub fn replay(traj: &Trajectory) -> Result<()> {
    let h = &traj.header;
    let mut env = CrowdEnv::new(h.config.clone())?;
    let first = env.reset(h.seed)?;
    if first.ego != h.robot || first.humans != h.humans || first.model != h.predictions {
        return Err(Error::Numerical(
            "replay diverged at the initial state".into(),
        ));
    }
    for rec in &traj.steps {
        let res = env.step(rec.action)?;
        let same = env.t() == rec.t
            && res.observation.ego == rec.robot
            && res.observation.humans == rec.humans
            && res.observation.model == rec.predictions
            && res.reward.to_bits() == rec.reward.to_bits()
            && res.cost.to_bits() == rec.cost.to_bits()
            && res.intrusion == rec.intrusion
            && res.outcome == rec.outcome;
        if !same {
            return Err(Error::Numerical(format!(
                "replay diverged at t = {}",
                rec.t
            )));
        }
    }
    if env.outcome() != traj.steps.last().map_or(Outcome::Running, |s| s.outcome) {
        return Err(Error::Numerical(
            "replay ended with a different outcome".into(),
        ));
    }
    Ok(())
}

/// Intrusion of a step recomputed from its recorded geometry alone.
pub fn recompute_intrusion(rec: &StepRecord, config: &EnvConfig) -> IntrusionReport {
    buffer::max_intrusion(
        rec.robot.position,
        rec.robot.radius,
        &rec.humans,
        &rec.predictions,
        &config.buffer,
    )
}

/// Episode metrics recomputed from the recorded geometry.
pub fn metrics_from_trajectory(traj: &Trajectory) -> EpisodeMetrics {
    let cfg = &traj.header.config;
    let mut m = EpisodeMetrics {
        seed: traj.header.seed,
        outcome: traj.steps.last().map_or(Outcome::Running, |s| s.outcome),
        nav_time: traj.steps.len() as f64 * cfg.world.dt,
        path_length: 0.0,
        intrusion_steps: 0,
        total_steps: traj.steps.len(),
        intrusion_distances: Vec::new(),
    };
    let mut prev = traj.header.robot.position;
    for rec in &traj.steps {
        m.path_length += rec.robot.position.distance(prev);
        prev = rec.robot.position;
        if recompute_intrusion(rec, cfg).is_intrusion() {
            m.intrusion_steps += 1;
            m.intrusion_distances
                .push(surface_separation(&rec.robot, &rec.humans));
        }
    }
    m
}
