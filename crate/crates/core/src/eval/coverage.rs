//! Empirical coverage of the conformal radii along simulated episodes.

use super::policy::RobotPolicy;
use super::runner::{episode_seeds, run_episode};
use crate::error::{Error, Result};
use crate::sim::{CrowdEnv, EnvConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    /// Step counter, continuous across episodes.
    pub step: usize,
    pub episode: usize,
    pub h: usize,
    /// Prediction horizon, 1-based.
    pub k: usize,
    pub actual: f64,
    pub sampled_radius: f64,
    /// Radius minus actual error; negative means the radius fell short.
    pub aci_error: f64,
    pub covered: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub h: usize,
    pub k: usize,
    pub n: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub cells: Vec<CoverageCell>,
    pub per_horizon: Vec<CoverageCell>,
    pub aggregate: f64,
}

pub fn run_coverage_report(
    env_config: &EnvConfig,
    policy: &mut dyn RobotPolicy,
    per_seed: usize,
    seeds: &[u64],
) -> Result<CoverageReport> {
    if per_seed == 0 || seeds.is_empty() {
        return Err(Error::Usage(
            "coverage needs at least one episode and one seed".into(),
        ));
    }
    let mut env = CrowdEnv::new(env_config.clone())?;
    let mut rows = Vec::new();
    let mut step = 0usize;
    for (episode, seed) in episode_seeds(seeds, per_seed).into_iter().enumerate() {
        run_episode(&mut env, policy, seed, |_, _, _, env| {
            for e in env.last_errors() {
                rows.push(CoverageRow {
                    step,
                    episode,
                    h: e.human,
                    k: e.k,
                    actual: e.actual,
                    sampled_radius: e.radius,
                    aci_error: e.radius - e.actual,
                    covered: u8::from(e.radius >= e.actual),
                });
            }
            step += 1;
        })?;
    }
    Ok(summarise(rows))
}

fn summarise(rows: Vec<CoverageRow>) -> CoverageReport {
    let mut cells: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut horizons: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in &rows {
        let c = cells.entry((r.h, r.k)).or_default();
        c.0 += 1;
        c.1 += r.covered as usize;
        let c = horizons.entry(r.k).or_default();
        c.0 += 1;
        c.1 += r.covered as usize;
    }
    let frac = |(n, hit): (usize, usize)| hit as f64 / n as f64;
    let covered: usize = rows.iter().map(|r| r.covered as usize).sum();
    CoverageReport {
        aggregate: if rows.is_empty() {
            f64::NAN
        } else {
            covered as f64 / rows.len() as f64
        },
        cells: cells
            .into_iter()
            .map(|((h, k), v)| CoverageCell {
                h,
                k,
                n: v.0,
                coverage: frac(v),
            })
            .collect(),
        per_horizon: horizons
            .into_iter()
            .map(|(k, v)| CoverageCell {
                h: usize::MAX,
                k,
                n: v.0,
                coverage: frac(v),
            })
            .collect(),
        rows,
    }
}

pub fn write_coverage_csv(path: &Path, report: &CoverageReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::policy::GoalSeeker;

    fn report() -> CoverageReport {
        let mut cfg = EnvConfig::default();
        cfg.world.n_humans = 6;
        run_coverage_report(&cfg, &mut GoalSeeker { dt: 0.25 }, 3, &[4]).unwrap()
    }

    #[test]
    fn rows_are_well_formed() {
        let r = report();
        assert!(!r.rows.is_empty());
        for row in &r.rows {
            assert!((1..=5).contains(&row.k) && row.h < 6);
            assert_eq!(row.covered == 1, row.sampled_radius >= row.actual);
            assert_eq!(row.aci_error, row.sampled_radius - row.actual);
        }
        assert!(r.rows.windows(2).all(|w| w[0].step <= w[1].step));
        for c in r.cells.iter().chain(&r.per_horizon) {
            assert!((0.0..=1.0).contains(&c.coverage));
        }
        assert!((0.0..=1.0).contains(&r.aggregate));
    }

    #[test]
    fn reproducible() {
        assert_eq!(report(), report());
    }
}
