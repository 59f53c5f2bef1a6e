//! Dynamically-tuned adaptive conformal inference over prediction errors.
//!
//! Every (human, horizon) pair runs `M` online quantile trackers ("experts")
//! with different learning rates. Each expert moves its error estimate up by
//! `(1 - alpha) * gamma` after a miss and down by `alpha * gamma` after a hit,
//! so on its own it converges to the `1 - alpha` quantile of the error stream.
//! The experts are mixed with exponential weights on their pinball loss, and
//! the radius handed to the planner is drawn from the resulting distribution.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtaciConfig {
    /// Target miscoverage.
    pub alpha: f64,
    /// One learning rate per expert.
    pub learning_rates: Vec<f64>,
    /// Mixing floor added to every expert weight.
    pub sigma: f64,
    /// Temperature of the exponential weights.
    pub eta: f64,
    /// Starting error estimate per horizon, in meters.
    pub initial_errors: Vec<f64>,
}

impl Default for DtaciConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            learning_rates: vec![0.05, 0.1, 0.2],
            sigma: 0.05,
            eta: 10.0,
            initial_errors: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

impl DtaciConfig {
    pub fn n_experts(&self) -> usize {
        self.learning_rates.len()
    }

    pub fn horizon(&self) -> usize {
        self.initial_errors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("dtaci.alpha must be in (0, 1)".into()));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::Config(
                "dtaci.learning_rates must be non-empty and positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config("dtaci.sigma must be in [0, 1]".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config("dtaci.eta must be > 0".into()));
        }
        if self.initial_errors.is_empty() || self.initial_errors.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::Config(
                "dtaci.initial_errors must be non-empty and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Expert estimates and mixing weights for one (human, horizon) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertState {
    pub delta_hat: Vec<f64>,
    pub weights: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ExpertState {
    pub fn new(initial: f64, n_experts: usize) -> Self {
        let uniform = 1.0 / n_experts as f64;
        Self {
            delta_hat: vec![initial; n_experts],
            weights: vec![uniform; n_experts],
            probs: vec![uniform; n_experts],
        }
    }
}

/// Quantile loss. Its minimiser over `estimate` is the `1 - alpha` quantile
/// of `actual`, which is the coverage target of the experts.
pub fn pinball_loss(actual: f64, estimate: f64, alpha: f64) -> f64 {
    if actual >= estimate {
        alpha * (actual - estimate)
    } else {
        (1.0 - alpha) * (estimate - actual)
    }
}

/// Online quantile step for expert `m`; returns the new estimate.
pub fn update_expert(state: &mut ExpertState, m: usize, actual: f64, config: &DtaciConfig) -> f64 {
    let estimate = state.delta_hat[m];
    let err = if estimate < actual { 1.0 } else { 0.0 };
    let updated = (estimate - config.learning_rates[m] * (config.alpha - err)).max(0.0);
    state.delta_hat[m] = updated;
    updated
}

/// Reweights the experts given their losses on the latest observation.
pub fn update_weights_with_losses(
    state: &mut ExpertState,
    losses: &[f64],
    config: &DtaciConfig,
) -> Result<()> {
    let m = state.weights.len();
    let scaled: Vec<f64> = state
        .weights
        .iter()
        .zip(losses)
        .map(|(w, l)| w * (-config.eta * l).exp())
        .collect();
    let total: f64 = scaled.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical(format!(
            "expert weight normaliser is {total}"
        )));
    }
    let floor = config.sigma / m as f64;
    for (w, s) in state.weights.iter_mut().zip(&scaled) {
        *w = (1.0 - config.sigma) * s / total + floor;
    }
    let sum: f64 = state.weights.iter().sum();
    for (p, w) in state.probs.iter_mut().zip(&state.weights) {
        *p = w / sum;
    }
    Ok(())
}

pub fn update_weights(state: &mut ExpertState, actual: f64, config: &DtaciConfig) -> Result<()> {
    let losses: Vec<f64> = state
        .delta_hat
        .iter()
        .map(|&d| pinball_loss(actual, d, config.alpha))
        .collect();
    update_weights_with_losses(state, &losses, config)
}

/// Draws an expert index from `probs` using a uniform variate `u` in [0, 1).
fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave `acc` a hair below 1; fall back to the last expert
    // with nonzero mass.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Grid of expert states for every (human, horizon) pair of one environment.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    config: DtaciConfig,
    states: Vec<ExpertState>,
    n_humans: usize,
    rng: ChaCha8Rng,
}

impl EstimatorBank {
    pub fn new(config: DtaciConfig, n_humans: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut bank = Self {
            config,
            states: Vec::new(),
            n_humans: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        bank.reset(n_humans);
        Ok(bank)
    }

    /// Restores every pair to the configured initial errors.
    pub fn reset(&mut self, n_humans: usize) {
        let k = self.config.horizon();
        let m = self.config.n_experts();
        self.n_humans = n_humans;
        self.states = (0..n_humans * k)
            .map(|i| ExpertState::new(self.config.initial_errors[i % k], m))
            .collect();
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn config(&self) -> &DtaciConfig {
        &self.config
    }

    pub fn n_humans(&self) -> usize {
        self.n_humans
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon()
    }

    fn index(&self, h: usize, k: usize) -> usize {
        debug_assert!(h < self.n_humans && k < self.horizon());
        h * self.horizon() + k
    }

    /// State for human `h` at zero-based horizon index `k`.
    pub fn state(&self, h: usize, k: usize) -> &ExpertState {
        &self.states[self.index(h, k)]
    }

    pub fn state_mut(&mut self, h: usize, k: usize) -> &mut ExpertState {
        let i = self.index(h, k);
        &mut self.states[i]
    }

    /// Feeds one realised error: every expert steps, then the mixture is
    /// reweighted on the updated estimates.
    pub fn observe_and_update(&mut self, h: usize, k: usize, actual: f64) -> Result<()> {
        let i = self.index(h, k);
        let config = &self.config;
        let state = &mut self.states[i];
        for m in 0..config.n_experts() {
            update_expert(state, m, actual, config);
        }
        update_weights(state, actual, config)
    }

    /// Draws the radius for (h, k) from the expert mixture.
    pub fn sample_radius(&mut self, h: usize, k: usize) -> f64 {
        let i = self.index(h, k);
        let u: f64 = self.rng.random();
        let state = &self.states[i];
        state.delta_hat[pick(&state.probs, u)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(alpha: f64, rates: Vec<f64>) -> DtaciConfig {
        DtaciConfig {
            alpha,
            learning_rates: rates,
            ..DtaciConfig::default()
        }
    }

    #[test]
    fn expert_step_after_miss() {
        let c = cfg(0.1, vec![0.1]);
        let mut s = ExpertState::new(0.30, 1);
        let v = update_expert(&mut s, 0, 0.50, &c);
        assert!((v - 0.39).abs() < 1e-12);
    }

    #[test]
    fn expert_step_after_hit() {
        let c = cfg(0.1, vec![0.1]);
        let mut s = ExpertState::new(0.50, 1);
        let v = update_expert(&mut s, 0, 0.30, &c);
        assert!((v - 0.49).abs() < 1e-12);
    }

    #[test]
    fn expert_unchanged_with_zero_alpha_and_hit() {
        // alpha = 0 is outside the validated range but the update is defined.
        let c = DtaciConfig {
            alpha: 0.0,
            learning_rates: vec![0.1],
            ..DtaciConfig::default()
        };
        let mut s = ExpertState::new(0.5, 1);
        assert_eq!(update_expert(&mut s, 0, 0.2, &c), 0.5);
    }

    #[test]
    fn expert_clamped_at_zero() {
        let c = cfg(0.5, vec![1.0]);
        let mut s = ExpertState::new(0.1, 1);
        assert_eq!(update_expert(&mut s, 0, 0.0, &c), 0.0);
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball_loss(0.7, 0.7, 0.1), 0.0);
        assert!((pinball_loss(1.0, 0.6, 0.1) - 0.04).abs() < 1e-12);
        assert!((pinball_loss(0.6, 1.0, 0.1) - 0.36).abs() < 1e-12);
    }

    #[test]
    fn equal_losses_keep_uniform() {
        let c = DtaciConfig::default();
        let mut s = ExpertState::new(0.3, 3);
        update_weights_with_losses(&mut s, &[0.2, 0.2, 0.2], &c).unwrap();
        for p in &s.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_mixing_floor_is_uniform() {
        let c = DtaciConfig {
            sigma: 1.0,
            ..DtaciConfig::default()
        };
        let mut s = ExpertState::new(0.3, 3);
        s.weights = vec![0.7, 0.2, 0.1];
        update_weights_with_losses(&mut s, &[0.0, 5.0, 9.0], &c).unwrap();
        for w in &s.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_weights_hand_example() {
        let c = DtaciConfig {
            sigma: 0.0,
            eta: 1.0,
            ..DtaciConfig::default()
        };
        let mut s = ExpertState::new(0.3, 3);
        s.weights = vec![1.0, 1.0, 1.0];
        let ln2 = std::f64::consts::LN_2;
        update_weights_with_losses(&mut s, &[0.0, ln2, ln2], &c).unwrap();
        let expected = [0.5, 0.25, 0.25];
        for (p, e) in s.probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_expert_always_sampled() {
        let c = cfg(0.1, vec![0.1]);
        let mut bank = EstimatorBank::new(c, 2, 7).unwrap();
        bank.state_mut(1, 2).delta_hat[0] = 0.77;
        for _ in 0..100 {
            assert_eq!(bank.sample_radius(1, 2), 0.77);
        }
    }

    #[test]
    fn degenerate_distribution() {
        let mut bank = EstimatorBank::new(DtaciConfig::default(), 1, 3).unwrap();
        let s = bank.state_mut(0, 0);
        s.delta_hat = vec![0.11, 0.22, 0.33];
        s.probs = vec![1.0, 0.0, 0.0];
        for _ in 0..1000 {
            assert_eq!(bank.sample_radius(0, 0), 0.11);
        }
    }

    #[test]
    fn sampling_frequencies_match_probs() {
        let mut bank = EstimatorBank::new(DtaciConfig::default(), 1, 11).unwrap();
        let s = bank.state_mut(0, 0);
        s.delta_hat = vec![1.0, 2.0, 3.0];
        s.probs = vec![0.5, 0.25, 0.25];
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let r = bank.sample_radius(0, 0);
            counts[r as usize - 1] += 1;
        }
        for (c, p) in counts.iter().zip([0.5, 0.25, 0.25]) {
            assert!((*c as f64 / n as f64 - p).abs() <= 0.03, "{counts:?}");
        }
    }

    #[test]
    fn large_error_raises_every_expert() {
        let mut bank = EstimatorBank::new(DtaciConfig::default(), 1, 0).unwrap();
        let before = bank.state(0, 1).delta_hat.clone();
        bank.observe_and_update(0, 1, 100.0).unwrap();
        for (b, a) in before.iter().zip(&bank.state(0, 1).delta_hat) {
            assert!(a > b);
        }
    }

    #[test]
    fn zero_error_lowers_by_alpha_gamma() {
        let c = DtaciConfig::default();
        let mut bank = EstimatorBank::new(c.clone(), 1, 0).unwrap();
        bank.observe_and_update(0, 4, 0.0).unwrap();
        for (d, g) in bank.state(0, 4).delta_hat.iter().zip(&c.learning_rates) {
            assert!((d - (0.5 - g * c.alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_identical_banks() {
        let mut a = EstimatorBank::new(DtaciConfig::default(), 3, 42).unwrap();
        let mut b = EstimatorBank::new(DtaciConfig::default(), 3, 42).unwrap();
        for t in 0..200 {
            let e = (t as f64 * 0.37).sin().abs();
            for h in 0..3 {
                for k in 0..5 {
                    a.observe_and_update(h, k, e * (k + 1) as f64).unwrap();
                    b.observe_and_update(h, k, e * (k + 1) as f64).unwrap();
                    assert_eq!(
                        a.sample_radius(h, k).to_bits(),
                        b.sample_radius(h, k).to_bits()
                    );
                }
            }
        }
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn reset_restores_initial_errors() {
        let c = DtaciConfig::default();
        let mut bank = EstimatorBank::new(c.clone(), 2, 1).unwrap();
        bank.observe_and_update(1, 3, 9.0).unwrap();
        bank.reset(2);
        for h in 0..2 {
            for k in 0..5 {
                assert!(bank
                    .state(h, k)
                    .delta_hat
                    .iter()
                    .all(|&d| d == c.initial_errors[k]));
            }
        }
    }

    #[test]
    fn single_expert_tracks_constant_error() {
        let c = cfg(0.1, vec![0.05]);
        let mut s = ExpertState::new(0.0, 1);
        let target = 0.8;
        for _ in 0..500 {
            update_expert(&mut s, 0, target, &c);
        }
        for _ in 0..200 {
            update_expert(&mut s, 0, target, &c);
            assert!((s.delta_hat[0] - target).abs() <= 0.05 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn probs_stay_valid(errors in proptest::collection::vec(0.0..3.0f64, 1..200)) {
            let c = DtaciConfig::default();
            let mut s = ExpertState::new(0.3, 3);
            for e in errors {
                for m in 0..3 {
                    update_expert(&mut s, m, e, &c);
                }
                update_weights(&mut s, e, &c).unwrap();
                let sum: f64 = s.probs.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(s.probs.iter().all(|&p| p >= 0.0));
                prop_assert!(s.weights.iter().all(|&w| w > 0.0));
                prop_assert!(s.delta_hat.iter().all(|&d| d >= 0.0));
            }
        }
    }
}
