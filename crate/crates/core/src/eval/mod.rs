//! Evaluation harness: metrics, batch protocols, coverage reports and
//! trajectory dumps.

pub mod coverage;
pub mod dump;
pub mod metrics;
pub mod policy;
pub mod runner;

pub use coverage::{run_coverage_report, write_coverage_csv, CoverageReport, CoverageRow};
pub use dump::{dump_trajectory, read_trajectory, record_trajectory, replay, Trajectory};
pub use metrics::{aggregate, BatchReport, EpisodeMetrics};
pub use policy::{Baseline, GoalSeeker, NetworkPolicy, OrcaRobot, RobotPolicy, SfRobot};
pub use runner::{episode_seeds, run_episode, run_eval, write_episodes_csv, write_report_csv};
