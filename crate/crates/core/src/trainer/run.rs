use super::env::Environment;
use super::gae::compute_gae;
use super::lagrange::LagrangeState;
use super::ppo::{combined_advantage, normalize};
use super::TrainConfig;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::nn::{gaussian, ActorCritic, Adam, AdamConfig, Features, LossSpec, Sample};
use crate::seeding::{derive_seed, streams};
use crate::sim::{CrowdEnv, Observation, Outcome};
use crate::Vec2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    /// Mean return of the episodes that finished during this iteration.
    pub mean_reward: f64,
    /// Mean episode cost of the same episodes.
    pub mean_cost: f64,
    /// Multiplier after this iteration's update.
    pub lambda: f64,
    /// Success rate over the most recent `sr_window` episodes.
    pub sr_recent: f64,
}

pub struct TrainResult {
    pub net: ActorCritic,
    pub log: Vec<LogRow>,
    pub lagrange: LagrangeState,
    pub steps: usize,
}

struct Step {
    features: Features,
    action: Vec2,
    log_prob: f64,
    reward: f64,
    cost: f64,
    value_r: f64,
    value_c: f64,
    done: bool,
}

/// Per-step training targets, aligned with the flattened rollout.
struct Targets {
    adv_r: Vec<f64>,
    adv_c: Vec<f64>,
    target_r: Vec<f64>,
    target_c: Vec<f64>,
}

struct Tracker {
    episode: u64,
    reward: f64,
    cost: f64,
}

/// Runs PPO-Lagrangian on `envs`, which are stepped round-robin.
/// `on_iteration` sees every log row as it is produced.
pub fn train<E: Environment>(
    envs: &mut [E],
    mut net: ActorCritic,
    cfg: &TrainConfig,
    seed: u64,
    mut on_iteration: impl FnMut(&LogRow),
) -> Result<TrainResult> {
    cfg.validate()?;
    if envs.is_empty() {
        return Err(Error::Usage("at least one environment is required".into()));
    }
    let episode_root = derive_seed(seed, streams::EPISODE);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::ACTION_NOISE));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::SHUFFLE));
    let adam = AdamConfig {
        lr: cfg.lr,
        max_grad_norm: Some(cfg.max_grad_norm),
        ..AdamConfig::default()
    };
    let mut opt_shared = Adam::new(adam, net.shared.n_params());
    let mut opt_cost = Adam::new(adam, net.cost_critic.n_params());
    let mut lagrange = LagrangeState::new(
        cfg.lambda_init,
        cfg.lr_lambda,
        cfg.cost_limit,
        cfg.cost_window,
        cfg.freeze_lambda,
    )
    .with_optimism(cfg.lambda_optimism);
    let spec = LossSpec {
        clip_eps: cfg.clip_eps,
        policy_weight: 1.0,
        value_weight: cfg.value_coef,
        cost_weight: cfg.cost_value_coef,
    };
    let std = net.action_std();

    let n_envs = envs.len();
    let steps_per_env = (cfg.rollout_steps / n_envs).max(1);
    let per_iteration = steps_per_env * n_envs;
    let iterations = cfg.total_steps.div_ceil(per_iteration).max(1);

    let mut next_episode = 0u64;
    let mut observations: Vec<Observation> = Vec::with_capacity(n_envs);
    let mut trackers = Vec::with_capacity(n_envs);
    for env in envs.iter_mut() {
        observations.push(env.reset(derive_seed(episode_root, next_episode))?);
        trackers.push(Tracker {
            episode: next_episode,
            reward: 0.0,
            cost: 0.0,
        });
        next_episode += 1;
    }
    let mut recent_success: VecDeque<bool> = VecDeque::with_capacity(cfg.sr_window);
    let mut log = Vec::with_capacity(iterations);
    let mut steps = 0usize;

    for iteration in 0..iterations {
        let mut rollouts: Vec<Vec<Step>> = (0..n_envs)
            .map(|_| Vec::with_capacity(steps_per_env))
            .collect();
        let (mut finished, mut sum_reward, mut sum_cost) = (0usize, 0.0, 0.0);

        for _ in 0..steps_per_env {
            for (e, env) in envs.iter_mut().enumerate() {
                let features = net.encode(&observations[e])?;
                let out = net.forward_features(&features)?;
                let (action, log_prob) =
                    gaussian::sample_with_log_prob(out.action_mean, std, &mut noise_rng);
                let res = env.step(action)?;
                let tr = &mut trackers[e];
                tr.reward += res.reward;
                tr.cost += res.cost;
                rollouts[e].push(Step {
                    features,
                    action,
                    log_prob,
                    reward: res.reward,
                    cost: res.cost,
                    value_r: out.value_r,
                    value_c: out.value_c,
                    done: res.done,
                });
                if res.done {
                    finished += 1;
                    sum_reward += tr.reward;
                    sum_cost += tr.cost;
                    lagrange.record_episode(tr.cost);
                    if recent_success.len() == cfg.sr_window {
                        recent_success.pop_front();
                    }
                    recent_success.push_back(res.outcome == Outcome::Success);
                    *tr = Tracker {
                        episode: next_episode,
                        reward: 0.0,
                        cost: 0.0,
                    };
                    observations[e] = env.reset(derive_seed(episode_root, tr.episode))?;
                    next_episode += 1;
                } else {
                    observations[e] = res.observation;
                }
            }
        }
        steps += per_iteration;

        // Targets per environment, then flattened in environment order.
        let mut targets = Targets {
            adv_r: Vec::with_capacity(per_iteration),
            adv_c: Vec::with_capacity(per_iteration),
            target_r: Vec::with_capacity(per_iteration),
            target_c: Vec::with_capacity(per_iteration),
        };
        for (e, roll) in rollouts.iter().enumerate() {
            let last = net.forward(&observations[e])?;
            let dones: Vec<bool> = roll.iter().map(|s| s.done).collect();
            let col = |f: fn(&Step) -> f64| roll.iter().map(f).collect::<Vec<f64>>();
            let (ar, tr) = compute_gae(
                &col(|s| s.reward),
                &col(|s| s.value_r),
                &dones,
                last.value_r,
                cfg.discount,
                cfg.gae_lambda,
            );
            let (ac, tc) = compute_gae(
                &col(|s| s.cost),
                &col(|s| s.value_c),
                &dones,
                last.value_c,
                cfg.discount,
                cfg.gae_lambda,
            );
            targets.adv_r.extend(ar);
            targets.adv_c.extend(ac);
            targets.target_r.extend(tr);
            targets.target_c.extend(tc);
        }
        let flat: Vec<&Step> = rollouts.iter().flatten().collect();

        let lambda = lagrange.lambda;
        let mut order: Vec<usize> = (0..flat.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let mut a_r: Vec<f64> = chunk.iter().map(|&i| targets.adv_r[i]).collect();
                let mut a_c: Vec<f64> = chunk.iter().map(|&i| targets.adv_c[i]).collect();
                normalize(&mut a_r);
                normalize(&mut a_c);
                let batch: Vec<Sample> = chunk
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| Sample {
                        features: &flat[i].features,
                        action: flat[i].action,
                        old_log_prob: flat[i].log_prob,
                        advantage: combined_advantage(a_r[j], a_c[j], lambda),
                        target_r: targets.target_r[i],
                        target_c: targets.target_c[i],
                    })
                    .collect();
                let (loss, grad) = net.loss_and_grad(&batch, &spec)?;
                if !loss.total.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at iteration {iteration}; |shared params| = {:.6e}, |cost params| = {:.6e}",
                        net.shared.norm(),
                        net.cost_critic.norm()
                    )));
                }
                let mut shared = net.shared_flat();
                opt_shared.step(&mut shared, &grad.shared);
                let mut cost = net.cost_flat();
                opt_cost.step(&mut cost, &grad.cost);
                shared.extend(cost);
                net.set_flat(&shared)?;
                if !net.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite parameters after update at iteration {iteration}"
                    )));
                }
            }
        }

        lagrange.update();
        let mean = |s: f64| {
            if finished > 0 {
                s / finished as f64
            } else {
                f64::NAN
            }
        };
        let sr = if recent_success.is_empty() {
            0.0
        } else {
            recent_success.iter().filter(|&&s| s).count() as f64 / recent_success.len() as f64
        };
        let row = LogRow {
            iteration,
            mean_reward: mean(sum_reward),
            mean_cost: mean(sum_cost),
            lambda: lagrange.lambda,
            sr_recent: sr,
        };
        on_iteration(&row);
        log.push(row);
    }

    Ok(TrainResult {
        net,
        log,
        lagrange,
        steps,
    })
}

/// Builds `n_parallel_envs` crowd environments and trains a fresh network.
pub fn train_crowd(
    config: &ExperimentConfig,
    seed: u64,
    on_iteration: impl FnMut(&LogRow),
) -> Result<TrainResult> {
    config.validate()?;
    let mut envs = (0..config.train.n_parallel_envs)
        .map(|_| CrowdEnv::new(config.env.clone()))
        .collect::<Result<Vec<_>>>()?;
    let net = ActorCritic::new(config.network, config.env.prediction_horizon, seed);
    train(&mut envs, net, &config.train, seed, on_iteration)
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
