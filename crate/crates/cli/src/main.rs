use clap::{Parser, Subcommand};
use crowdnav_core::config::ExperimentConfig;
use crowdnav_core::eval::{self, Baseline, GoalSeeker, NetworkPolicy};
use crowdnav_core::nn::gradcheck::check_gradients;
use crowdnav_core::nn::{gaussian, ActorCritic, Checkpoint, LossSpec, NetworkConfig, Sample};
use crowdnav_core::sim::{CrowdEnv, EnvConfig, Preset};
use crowdnav_core::trainer::{self, LogRow};
use crowdnav_core::{Error, Result, Vec2};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "crowdnav",
    version,
    about = "Crowd navigation with conformal buffers and PPO-Lagrangian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes checkpoint.bin, train_log.csv and config.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Skip the finite-difference gradient check run before training.
        #[arg(long)]
        skip_gradcheck: bool,
    },
    /// Evaluate a checkpoint with its mean action.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Scenario config; defaults to the one stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Episodes per seed.
        #[arg(long, default_value_t = 250)]
        episodes: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// in_distribution, rushing or sf.
        #[arg(long)]
        preset: Option<String>,
        /// Optional per-episode CSV.
        #[arg(long)]
        episodes_out: Option<PathBuf>,
    },
    /// Coverage of the conformal radii under a goal-seeking robot.
    Coverage {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record one episode of a checkpoint as JSONL.
    Dump {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Re-simulate a dump and check every recorded state.
    Replay {
        #[arg(long)]
        dump: PathBuf,
    },
    /// Evaluate a rule-based robot policy.
    Baseline {
        /// orca or sf.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 250)]
        episodes: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&Error::Usage(e.to_string())),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

/// One JSON line on stderr.
fn report(e: &Error) -> ExitCode {
    let message = e
        .to_string()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    eprintln!(
        "{}",
        serde_json::json!({ "error": e.kind(), "message": message })
    );
    ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn apply_preset(env: &mut EnvConfig, preset: Option<&str>) -> Result<()> {
    if let Some(p) = preset {
        p.parse::<Preset>()?.apply(&mut env.world);
        env.validate()?;
    }
    Ok(())
}

fn print_report(report: &eval::BatchReport) {
    println!(
        "SR {:.4}  CR {:.4}  TR {:.4}  NT {:.3}  PL {:.3}  ITR {:.4}  SD {:.4}  (n = {})",
        report.sr,
        report.cr,
        report.tr,
        report.nt,
        report.pl,
        report.itr,
        report.sd,
        report.n_episodes
    );
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            config,
            seed,
            out,
            skip_gradcheck,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if !skip_gradcheck {
                preflight_gradient_check(&cfg.env)?;
            }
            std::fs::create_dir_all(&out)?;
            let result = trainer::train_crowd(&cfg, seed, |row: &LogRow| {
                println!(
                    "iter {:>5}  reward {:>8.3}  cost {:>7.4}  lambda {:>7.4}  sr {:.3}",
                    row.iteration, row.mean_reward, row.mean_cost, row.lambda, row.sr_recent
                );
            })?;
            trainer::write_log(&out.join("train_log.csv"), &result.log)?;
            Checkpoint::new(result.net, cfg.clone(), seed, result.lagrange.lambda)
                .save(&out.join("checkpoint.bin"))?;
            std::fs::write(out.join("config.json"), cfg.to_json())?;
            println!("trained {} steps; wrote {}", result.steps, out.display());
        }
        Command::Eval {
            ckpt,
            config,
            episodes,
            seeds,
            out,
            preset,
            episodes_out,
        } => {
            let ck = Checkpoint::load(&ckpt)?;
            let mut env = match config {
                Some(p) => ExperimentConfig::load(&p)?.env,
                None => ck.header.config.env.clone(),
            };
            apply_preset(&mut env, preset.as_deref())?;
            ck.check_compatible(&env)?;
            let mut policy = NetworkPolicy { net: ck.net };
            let (report, per_episode) = eval::run_eval(&mut policy, &env, episodes, &seeds)?;
            eval::write_report_csv(&out, &report)?;
            if let Some(p) = episodes_out {
                eval::write_episodes_csv(&p, &per_episode)?;
            }
            print_report(&report);
        }
        Command::Baseline {
            policy,
            config,
            episodes,
            seeds,
            out,
            preset,
        } => {
            let baseline: Baseline = policy.parse()?;
            let mut env = load_config(config.as_deref())?.env;
            apply_preset(&mut env, preset.as_deref())?;
            let mut robot = baseline.build(env.world.dt);
            let (report, _) = eval::run_eval(robot.as_mut(), &env, episodes, &seeds)?;
            eval::write_report_csv(&out, &report)?;
            print_report(&report);
        }
        Command::Coverage {
            config,
            episodes,
            seeds,
            out,
        } => {
            let env = load_config(config.as_deref())?.env;
            let mut robot = GoalSeeker { dt: env.world.dt };
            let report = eval::run_coverage_report(&env, &mut robot, episodes, &seeds)?;
            eval::write_coverage_csv(&out, &report)?;
            println!(
                "aggregate coverage {:.4} over {} scored predictions",
                report.aggregate,
                report.rows.len()
            );
            for c in &report.per_horizon {
                println!("k = {}: coverage {:.4} (n = {})", c.k, c.coverage, c.n);
            }
            for c in &report.cells {
                println!(
                    "h = {:>2} k = {}: coverage {:.4} (n = {})",
                    c.h, c.k, c.coverage, c.n
                );
            }
        }
        Command::Dump {
            ckpt,
            seed,
            out,
            config,
            preset,
        } => {
            let ck = Checkpoint::load(&ckpt)?;
            let mut env = match config {
                Some(p) => ExperimentConfig::load(&p)?.env,
                None => ck.header.config.env.clone(),
            };
            apply_preset(&mut env, preset.as_deref())?;
            ck.check_compatible(&env)?;
            let mut policy = NetworkPolicy { net: ck.net };
            let lines = eval::dump_trajectory(&mut policy, &env, seed, &out)?;
            println!("wrote {lines} records to {}", out.display());
        }
        Command::Replay { dump } => {
            let traj = eval::read_trajectory(&dump)?;
            eval::replay(&traj)?;
            println!("replay of {} steps matches", traj.steps.len());
        }
    }
    Ok(())
}

/// Finite-difference check of the loss gradient on a small network of the
/// configured architecture, fed with observations from the configured world.
fn preflight_gradient_check(env_cfg: &EnvConfig) -> Result<()> {
    let small = NetworkConfig {
        embed_dim: 4,
        attn_dim: 4,
        hidden_dim: 6,
        action_std: 0.2,
    };
    let mut net = ActorCritic::new(small, env_cfg.prediction_horizon, 0);
    let perturbed: Vec<f64> = net
        .flat()
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.05 * ((i as f64) * 0.37).sin())
        .collect();
    net.set_flat(&perturbed)?;
    let mut env = CrowdEnv::new(env_cfg.clone())?;
    let mut features = Vec::new();
    for seed in 0..2 {
        let obs = env.reset(seed)?;
        let mut f = net.encode(&obs)?;
        f.humans.rows = f.humans.rows.min(3);
        f.humans.data.truncate(f.humans.rows * f.humans.cols);
        features.push(f);
    }
    let batch: Vec<Sample> = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mean = net
                .forward_features(f)
                .map(|o| o.action_mean)
                .unwrap_or(Vec2::ZERO);
            let action = mean + Vec2::new(0.1, -0.05);
            Sample {
                features: f,
                action,
                old_log_prob: gaussian::log_prob(action, mean, small.action_std) + 0.02,
                advantage: if i == 0 { 1.0 } else { -0.7 },
                target_r: 0.5,
                target_c: 0.1,
            }
        })
        .collect();
    let spec = LossSpec {
        clip_eps: 0.08,
        policy_weight: 1.0,
        value_weight: 0.5,
        cost_weight: 0.5,
    };
    let report = check_gradients(&net, &batch, &spec, 1e-5, 1e-6)?;
    if report.max_rel_error > 1e-4 {
        return Err(Error::Numerical(format!(
            "gradient check failed: {report:?}"
        )));
    }
    Ok(())
}
