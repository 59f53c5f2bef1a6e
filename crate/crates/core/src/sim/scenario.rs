use super::{AgentState, WorldConfig};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::seeding::{derive_seed, streams};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub robot: AgentState,
    pub humans: Vec<AgentState>,
}

pub(crate) fn uniform_point(rng: &mut impl Rng, half: f64) -> Vec2 {
    Vec2::new(
        rng.random_range(-half..=half),
        rng.random_range(-half..=half),
    )
}

fn uniform_in(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

/// Draws a start layout. Same `(config, seed)` always yields the same layout.
pub fn sample_scenario(config: &WorldConfig, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::SCENARIO));
    let half = config.arena_half_extent;

    let mut robot = None;
    for _ in 0..MAX_ATTEMPTS {
        let start = uniform_point(&mut rng, half);
        let goal = uniform_point(&mut rng, half);
        if start.distance(goal) >= config.goal_min_distance {
            robot = Some(AgentState {
                position: start,
                velocity: Vec2::ZERO,
                radius: config.robot_radius,
                goal,
                v_max: config.robot_vmax,
            });
            break;
        }
    }
    let robot = robot.ok_or_else(|| Error::Scenario {
        attempts: MAX_ATTEMPTS,
        what: "robot start/goal pair".into(),
    })?;

    let n = config.n_humans;
    let rushing = config.rushing_count().min(n);
    let mut is_rushing = vec![false; n];
    for i in sample(&mut rng, n, rushing).iter() {
        is_rushing[i] = true;
    }

    let mut humans: Vec<AgentState> = Vec::with_capacity(n);
    for rush in is_rushing {
        let radius = uniform_in(&mut rng, config.human_radius_range);
        let vmax_draw = uniform_in(&mut rng, config.human_vmax_range);
        let v_max = if rush { config.rushing_vmax } else { vmax_draw };
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let p = uniform_point(&mut rng, half);
            let clear_of =
                |a: &AgentState| p.distance(a.position) > radius + a.radius + config.spawn_margin;
            if clear_of(&robot) && humans.iter().all(clear_of) {
                placed = Some(p);
                break;
            }
        }
        let position = placed.ok_or_else(|| Error::Scenario {
            attempts: MAX_ATTEMPTS,
            what: format!("non-overlapping position for human {}", humans.len()),
        })?;
        let goal = uniform_point(&mut rng, half);
        humans.push(AgentState {
            position,
            velocity: Vec2::ZERO,
            radius,
            goal,
            v_max,
        });
    }
    Ok(Scenario { robot, humans })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robot_goal_far_enough() {
        let c = WorldConfig::default();
        for seed in 0..200 {
            let s = sample_scenario(&c, seed).unwrap();
            assert!(s.robot.position.distance(s.robot.goal) >= 8.0);
        }
    }

    #[test]
    fn deterministic() {
        let c = WorldConfig::default();
        assert_eq!(
            sample_scenario(&c, 5).unwrap(),
            sample_scenario(&c, 5).unwrap()
        );
        assert_ne!(
            sample_scenario(&c, 5).unwrap(),
            sample_scenario(&c, 6).unwrap()
        );
    }

    #[test]
    fn ranges_and_overlap() {
        let c = WorldConfig::default();
        for seed in 0..100 {
            let s = sample_scenario(&c, seed).unwrap();
            assert_eq!(s.humans.len(), 20);
            let mut all = s.humans.clone();
            all.push(s.robot);
            for (i, a) in all.iter().enumerate() {
                for b in &all[i + 1..] {
                    assert!(a.position.distance(b.position) > a.radius + b.radius);
                }
            }
            for h in &s.humans {
                assert!((0.3..=0.5).contains(&h.radius));
                assert!((0.5..=1.5).contains(&h.v_max));
            }
        }
    }

    #[test]
    fn rushing_share_is_exact() {
        let c = WorldConfig {
            rushing_fraction: 0.2,
            ..WorldConfig::default()
        };
        for seed in 0..50 {
            let s = sample_scenario(&c, seed).unwrap();
            assert_eq!(s.humans.iter().filter(|h| h.v_max == 2.0).count(), 4);
        }
    }

    #[test]
    fn impossible_layout_is_an_error() {
        let c = WorldConfig {
            arena_half_extent: 1.0,
            goal_min_distance: 0.5,
            n_humans: 50,
            ..WorldConfig::default()
        };
        assert!(matches!(
            sample_scenario(&c, 0),
            Err(Error::Scenario { .. })
        ));
    }
}
