//! Per-episode metrics and their batch aggregate.

use crate::sim::{AgentState, Outcome};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Environment seed of the episode.
    pub seed: u64,
    pub outcome: Outcome,
    /// Seconds.
    pub nav_time: f64,
    /// Meters travelled by the robot.
    pub path_length: f64,
    pub intrusion_steps: usize,
    pub total_steps: usize,
    /// Surface separation to the nearest human at each intrusion step.
    pub intrusion_distances: Vec<f64>,
}

impl EpisodeMetrics {
    pub fn itr(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.intrusion_steps as f64 / self.total_steps as f64
        }
    }
}

/// Center distance minus radii sum to the closest human; infinite when
/// there are no humans.
pub fn surface_separation(robot: &AgentState, humans: &[AgentState]) -> f64 {
    humans
        .iter()
        .map(|h| robot.position.distance(h.position) - robot.radius - h.radius)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub sr: f64,
    pub cr: f64,
    pub tr: f64,
    /// Mean navigation time of successful episodes (s).
    pub nt: f64,
    /// Mean path length of successful episodes (m).
    pub pl: f64,
    pub itr: f64,
    /// Mean surface separation over all intrusion steps (m).
    pub sd: f64,
    pub n_episodes: usize,
    pub seeds: Vec<u64>,
}

/// Mean of the values summed in sorted order, so the result does not depend
/// on the order episodes finished in. NaN for an empty input.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn aggregate(episodes: &[EpisodeMetrics], seeds: &[u64]) -> BatchReport {
    let n = episodes.len();
    let count = |o: Outcome| episodes.iter().filter(|e| e.outcome == o).count();
    let (succ, coll) = (count(Outcome::Success), count(Outcome::Collision));
    // Anything that is neither success nor collision ended by the step limit.
    let time = n - succ - coll;
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let successful = episodes.iter().filter(|e| e.outcome == Outcome::Success);
    BatchReport {
        sr: frac(succ),
        cr: frac(coll),
        tr: frac(time),
        nt: mean(successful.clone().map(|e| e.nav_time).collect()),
        pl: mean(successful.map(|e| e.path_length).collect()),
        itr: mean(episodes.iter().map(EpisodeMetrics::itr).collect()),
        sd: mean(
            episodes
                .iter()
                .flat_map(|e| e.intrusion_distances.iter().copied())
                .collect(),
        ),
        n_episodes: n,
        seeds: seeds.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn episode(outcome: Outcome, steps: usize, intrusions: &[f64]) -> EpisodeMetrics {
        EpisodeMetrics {
            seed: 0,
            outcome,
            nav_time: steps as f64 * 0.25,
            path_length: steps as f64 * 0.2,
            intrusion_steps: intrusions.len(),
            total_steps: steps,
            intrusion_distances: intrusions.to_vec(),
        }
    }

    #[test]
    fn all_success() {
        let eps = vec![episode(Outcome::Success, 40, &[]); 5];
        let r = aggregate(&eps, &[1]);
        assert_eq!((r.sr, r.cr, r.tr), (1.0, 0.0, 0.0));
        assert_eq!(r.nt, 10.0);
        assert!(r.sd.is_nan());
    }

    #[test]
    fn itr_of_two_in_fifty() {
        assert_eq!(episode(Outcome::Success, 50, &[0.1, 0.2]).itr(), 0.04);
    }

    #[test]
    fn success_only_averages() {
        let eps = vec![
            episode(Outcome::Success, 40, &[0.2]),
            episode(Outcome::Timeout, 200, &[]),
            episode(Outcome::Collision, 10, &[0.1, 0.3]),
        ];
        let r = aggregate(&eps, &[]);
        assert_eq!(r.nt, 10.0);
        assert_eq!(r.pl, 8.0);
        assert!((r.sd - 0.2).abs() < 1e-15);
        assert!((r.itr - (1.0 / 40.0 + 0.0 + 0.2) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn separation_uses_surfaces() {
        let a = |x: f64, r: f64| AgentState {
            position: crate::Vec2::new(x, 0.0),
            velocity: crate::Vec2::ZERO,
            radius: r,
            goal: crate::Vec2::ZERO,
            v_max: 1.0,
        };
        assert!(
            (surface_separation(&a(0.0, 0.2), &[a(1.0, 0.3), a(-2.0, 0.3)]) - 0.5).abs() < 1e-15
        );
        assert_eq!(surface_separation(&a(0.0, 0.2), &[]), f64::INFINITY);
    }

    fn outcome_strategy() -> impl Strategy<Value = Outcome> {
        prop_oneof![
            Just(Outcome::Success),
            Just(Outcome::Collision),
            Just(Outcome::Timeout)
        ]
    }

    proptest! {
        #[test]
        fn rates_sum_to_one(outcomes in prop::collection::vec(outcome_strategy(), 1..60)) {
            let eps: Vec<_> = outcomes.iter().map(|&o| episode(o, 10, &[])).collect();
            let r = aggregate(&eps, &[]);
            prop_assert!((r.sr + r.cr + r.tr - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn order_does_not_matter(
            specs in prop::collection::vec((outcome_strategy(), 1usize..200, prop::collection::vec(0.0f64..1.0, 0..5)), 1..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let eps: Vec<_> = specs
                .iter()
                .map(|(o, n, d)| episode(*o, (*n).max(d.len()), d))
                .collect();
            let mut shuffled = eps.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = (aggregate(&eps, &[]), aggregate(&shuffled, &[]));
            prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }
    }
}
