//! Projected gradient ascent on the Lagrange multiplier.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One step of `lambda <- max(0, lambda + lr (mean_cost - limit))`.
pub fn lambda_step(lambda: f64, lr: f64, mean_cost: f64, limit: f64) -> f64 {
    (lambda + lr * (mean_cost - limit)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub lr_lambda: f64,
    pub cost_limit: f64,
    /// Window of recent episode cost sums.
    pub window: VecDeque<f64>,
    pub capacity: usize,
    /// Ablation switch: keeps lambda at its current value.
    pub frozen: bool,
    /// Weight `kappa` of the optimistic correction
    /// `lr * kappa * (g_t - g_{t-1})`; zero gives the plain step.
    pub optimism: f64,
    /// Previous dual gradient `C_bar - limit`.
    pub last_gradient: Option<f64>,
}

impl LagrangeState {
    pub fn new(
        lambda: f64,
        lr_lambda: f64,
        cost_limit: f64,
        capacity: usize,
        frozen: bool,
    ) -> Self {
        Self {
            lambda,
            lr_lambda,
            cost_limit,
            window: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
            frozen,
            optimism: 0.0,
            last_gradient: None,
        }
    }

    pub fn with_optimism(mut self, kappa: f64) -> Self {
        self.optimism = kappa;
        self
    }

    pub fn record_episode(&mut self, cost: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(cost);
    }

    pub fn mean_cost(&self) -> Option<f64> {
        (!self.window.is_empty())
            .then(|| self.window.iter().sum::<f64>() / self.window.len() as f64)
    }

    /// No-op while the window is empty or the multiplier is frozen.
    pub fn update(&mut self) -> f64 {
        if let (false, Some(c)) = (self.frozen, self.mean_cost()) {
            let g = c - self.cost_limit;
            let correction = self
                .last_gradient
                .map_or(0.0, |prev| self.optimism * (g - prev));
            self.lambda = lambda_step(self.lambda, self.lr_lambda, c + correction, self.cost_limit);
            self.last_gradient = Some(g);
        }
        self.lambda
    }
}
