//! Attention actor-critic.
//!
//! Two towers of identical architecture. The shared tower carries the
//! actor head and the reward value head; the cost tower is independent and
//! only has a value head.
//!
//! ```text
//! humans -> Linear+ReLU -> self-attention (+residual) --\
//! ego    -> Linear+ReLU ---------- query ----------------> attention pool
//! [pool | ego] -> Linear+ReLU -> Linear+ReLU -> value / tanh(mean) * v_max
//! ```

use super::features::{encode, human_feature_len, Features, EGO_FEATURES};
use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, streams};
use crate::sim::Observation;
use crate::trainer::ppo::{clipped_surrogate, surrogate_slope};
use crate::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub hidden_dim: usize,
    /// Per-dimension standard deviation of the action noise. Never trained.
    pub action_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            attn_dim: 32,
            hidden_dim: 64,
            action_std: 0.2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.attn_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        if !(self.action_std.is_finite() && self.action_std > 0.0) {
            return Err(Error::Config(format!(
                "action_std must be > 0, got {}",
                self.action_std
            )));
        }
        Ok(())
    }
}

// Parameter slots of a tower, in storage order.
const HUMAN_W: usize = 0;
const HUMAN_B: usize = 1;
const HH_Q: usize = 2;
const HH_K: usize = 3;
const HH_V: usize = 4;
const EGO_W: usize = 5;
const EGO_B: usize = 6;
const POOL_Q: usize = 7;
const POOL_K: usize = 8;
const POOL_V: usize = 9;
const T1_W: usize = 10;
const T1_B: usize = 11;
const T2_W: usize = 12;
const T2_B: usize = 13;
const VALUE_W: usize = 14;
const VALUE_B: usize = 15;
const ACTOR_W: usize = 16;
const ACTOR_B: usize = 17;
const BIASES: [usize; 6] = [HUMAN_B, EGO_B, T1_B, T2_B, VALUE_B, ACTOR_B];

pub fn tower_shapes(cfg: &NetworkConfig, horizon: usize, actor: bool) -> Vec<(usize, usize)> {
    let (e, a, t) = (cfg.embed_dim, cfg.attn_dim, cfg.hidden_dim);
    let mut shapes = vec![
        (human_feature_len(horizon), e),
        (1, e),
        (e, a),
        (e, a),
        (e, e),
        (EGO_FEATURES, e),
        (1, e),
        (e, a),
        (e, a),
        (e, e),
        (2 * e, t),
        (1, t),
        (t, t),
        (1, t),
        (t, 1),
        (1, 1),
    ];
    if actor {
        shapes.extend([(t, 2), (1, 2)]);
    }
    shapes
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub params: Vec<Matrix>,
}

impl Tower {
    fn zeros(shapes: &[(usize, usize)]) -> Self {
        Self {
            params: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    fn init(shapes: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Self {
        let mut tower = Self::zeros(shapes);
        for (i, m) in tower.params.iter_mut().enumerate() {
            if BIASES.contains(&i) {
                continue;
            }
            let mut bound = (6.0 / (m.rows + m.cols) as f64).sqrt();
            if i == ACTOR_W {
                bound *= 0.01;
            }
            for v in &mut m.data {
                *v = rng.random_range(-bound..bound);
            }
        }
        tower
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    pub fn norm(&self) -> f64 {
        self.params.iter().map(Matrix::norm_sq).sum::<f64>().sqrt()
    }

    pub fn has_actor(&self) -> bool {
        self.params.len() > ACTOR_B
    }

    fn push<'a>(&'a self, tape: &mut Tape<'a>) -> Vec<Var> {
        self.params.iter().map(|m| tape.param(m)).collect()
    }
}

struct TowerOut {
    value: Var,
    mean: Option<Var>,
}

fn tower_forward(
    tape: &mut Tape<'_>,
    p: &[Var],
    f: &Features,
    cfg: &NetworkConfig,
    actor: bool,
) -> TowerOut {
    let att_scale = 1.0 / (cfg.attn_dim as f64).sqrt();

    let ego_in = tape.leaf(f.ego.clone());
    let ego = tape.matmul(ego_in, p[EGO_W]);
    let ego = tape.add_row(ego, p[EGO_B]);
    let ego = tape.relu(ego);

    let pooled = if f.n_humans() == 0 {
        tape.leaf(Matrix::zeros(1, cfg.embed_dim))
    } else {
        let x = tape.leaf(f.humans.clone());
        let emb = tape.matmul(x, p[HUMAN_W]);
        let emb = tape.add_row(emb, p[HUMAN_B]);
        let emb = tape.relu(emb);

        let q = tape.matmul(emb, p[HH_Q]);
        let k = tape.matmul(emb, p[HH_K]);
        let v = tape.matmul(emb, p[HH_V]);
        let scores = tape.matmul_nt(q, k);
        let scores = tape.scale(scores, att_scale);
        let weights = tape.softmax_rows(scores);
        let mixed = tape.matmul(weights, v);
        let hh = tape.add(emb, mixed);

        let q = tape.matmul(ego, p[POOL_Q]);
        let k = tape.matmul(hh, p[POOL_K]);
        let v = tape.matmul(hh, p[POOL_V]);
        let scores = tape.matmul_nt(q, k);
        let scores = tape.scale(scores, att_scale);
        let weights = tape.softmax_rows(scores);
        tape.matmul(weights, v)
    };

    let z = tape.concat_cols(pooled, ego);
    let h = tape.matmul(z, p[T1_W]);
    let h = tape.add_row(h, p[T1_B]);
    let h = tape.relu(h);
    let h = tape.matmul(h, p[T2_W]);
    let h = tape.add_row(h, p[T2_B]);
    let h = tape.relu(h);

    let value = tape.matmul(h, p[VALUE_W]);
    let value = tape.add_row(value, p[VALUE_B]);
    let mean = actor.then(|| {
        let m = tape.matmul(h, p[ACTOR_W]);
        let m = tape.add_row(m, p[ACTOR_B]);
        let m = tape.tanh(m);
        tape.scale(m, f.v_max)
    });
    TowerOut { value, mean }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Output {
    pub action_mean: Vec2,
    pub value_r: f64,
    pub value_c: f64,
}

/// One training sample for the composite loss.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a Features,
    pub action: Vec2,
    pub old_log_prob: f64,
    /// Combined advantage `A_R - lambda * A_C`.
    pub advantage: f64,
    pub target_r: f64,
    pub target_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub clip_eps: f64,
    pub policy_weight: f64,
    /// c1
    pub value_weight: f64,
    /// c2
    pub cost_weight: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// Negated clipped surrogate, batch mean.
    pub policy: f64,
    pub value_r: f64,
    pub value_c: f64,
    pub total: f64,
    pub clip_fraction: f64,
}

/// Flat gradient, shared tower first then cost tower, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub shared: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub config: NetworkConfig,
    pub horizon: usize,
    pub shared: Tower,
    pub cost_critic: Tower,
}

impl ActorCritic {
    pub fn new(config: NetworkConfig, horizon: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::INIT));
        Self {
            shared: Tower::init(&tower_shapes(&config, horizon, true), &mut rng),
            cost_critic: Tower::init(&tower_shapes(&config, horizon, false), &mut rng),
            config,
            horizon,
        }
    }

    pub fn zeros(config: NetworkConfig, horizon: usize) -> Self {
        Self {
            shared: Tower::zeros(&tower_shapes(&config, horizon, true)),
            cost_critic: Tower::zeros(&tower_shapes(&config, horizon, false)),
            config,
            horizon,
        }
    }

    pub fn n_params(&self) -> usize {
        self.shared.n_params() + self.cost_critic.n_params()
    }

    pub fn action_std(&self) -> f64 {
        self.config.action_std
    }

    pub fn encode(&self, obs: &Observation) -> Result<Features> {
        encode(obs, self.horizon)
    }

    pub fn forward(&self, obs: &Observation) -> Result<Output> {
        self.forward_features(&self.encode(obs)?)
    }

    pub fn forward_features(&self, f: &Features) -> Result<Output> {
        let mut tape = Tape::new();
        let (mean, vr, vc) = self.record(&mut tape, f);
        let m = tape.value(mean);
        let out = Output {
            action_mean: Vec2::new(m.data[0], m.data[1]),
            value_r: tape.value(vr).data[0],
            value_c: tape.value(vc).data[0],
        };
        if !(out.action_mean.is_finite() && out.value_r.is_finite() && out.value_c.is_finite()) {
            return Err(self.non_finite("forward pass"));
        }
        Ok(out)
    }

    fn record<'a>(&'a self, tape: &mut Tape<'a>, f: &Features) -> (Var, Var, Var) {
        let ps = self.shared.push(tape);
        let pc = self.cost_critic.push(tape);
        let shared = tower_forward(tape, &ps, f, &self.config, true);
        let cost = tower_forward(tape, &pc, f, &self.config, false);
        (
            shared.mean.expect("shared tower has an actor head"),
            shared.value,
            cost.value,
        )
    }

    fn non_finite(&self, what: &str) -> Error {
        Error::Numerical(format!(
            "non-finite values in {what}; |shared params| = {:.6e}, |cost params| = {:.6e}",
            self.shared.norm(),
            self.cost_critic.norm()
        ))
    }

    /// Composite loss over a batch, without gradients.
    pub fn loss(&self, batch: &[Sample], spec: &LossSpec) -> Result<LossBreakdown> {
        let mut acc = LossBreakdown::default();
        for s in batch {
            let out = self.forward_features(s.features)?;
            self.accumulate_loss(&mut acc, s, &out, spec, batch.len());
        }
        Ok(acc)
    }

    fn accumulate_loss(
        &self,
        acc: &mut LossBreakdown,
        s: &Sample,
        out: &Output,
        spec: &LossSpec,
        n: usize,
    ) -> f64 {
        let n = n as f64;
        let std = self.config.action_std;
        let ratio =
            (super::gaussian::log_prob(s.action, out.action_mean, std) - s.old_log_prob).exp();
        let surrogate = clipped_surrogate(ratio, s.advantage, spec.clip_eps);
        let lp = -spec.policy_weight * surrogate / n;
        let lr = spec.value_weight * (out.value_r - s.target_r).powi(2) / n;
        let lc = spec.cost_weight * (out.value_c - s.target_c).powi(2) / n;
        acc.policy += lp;
        acc.value_r += lr;
        acc.value_c += lc;
        acc.total += lp + lr + lc;
        if (ratio - 1.0).abs() > spec.clip_eps {
            acc.clip_fraction += 1.0 / n;
        }
        ratio
    }

    /// Composite loss and its exact gradient with respect to every
    /// parameter of both towers.
    pub fn loss_and_grad(
        &self,
        batch: &[Sample],
        spec: &LossSpec,
    ) -> Result<(LossBreakdown, Gradient)> {
        let mut acc = LossBreakdown::default();
        let mut g_shared: Vec<Matrix> = self
            .shared
            .params
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect();
        let mut g_cost: Vec<Matrix> = self
            .cost_critic
            .params
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect();
        let n = batch.len() as f64;
        let std = self.config.action_std;

        for s in batch {
            let mut tape = Tape::new();
            let ps = self.shared.push(&mut tape);
            let pc = self.cost_critic.push(&mut tape);
            let shared = tower_forward(&mut tape, &ps, s.features, &self.config, true);
            let cost = tower_forward(&mut tape, &pc, s.features, &self.config, false);
            let mean_var = shared.mean.expect("shared tower has an actor head");
            let m = tape.value(mean_var);
            let out = Output {
                action_mean: Vec2::new(m.data[0], m.data[1]),
                value_r: tape.value(shared.value).data[0],
                value_c: tape.value(cost.value).data[0],
            };
            if !(out.action_mean.is_finite() && out.value_r.is_finite() && out.value_c.is_finite())
            {
                return Err(self.non_finite("forward pass"));
            }
            let ratio = self.accumulate_loss(&mut acc, s, &out, spec, batch.len());

            // d ratio / d mean = ratio * (a - mean) / std^2
            let slope = surrogate_slope(ratio, s.advantage, spec.clip_eps);
            let coef = -spec.policy_weight * slope * ratio / (std * std) / n;
            let d_mean = Matrix::row_vector(vec![
                coef * (s.action.x - out.action_mean.x),
                coef * (s.action.y - out.action_mean.y),
            ]);
            let d_vr = Matrix::row_vector(vec![
                2.0 * spec.value_weight * (out.value_r - s.target_r) / n,
            ]);
            let d_vc = Matrix::row_vector(vec![
                2.0 * spec.cost_weight * (out.value_c - s.target_c) / n,
            ]);
            let grads =
                tape.backward(&[(mean_var, d_mean), (shared.value, d_vr), (cost.value, d_vc)]);
            for (acc_m, v) in g_shared.iter_mut().zip(&ps) {
                if let Some(g) = grads.get(*v) {
                    acc_m.add_assign(g);
                }
            }
            for (acc_m, v) in g_cost.iter_mut().zip(&pc) {
                if let Some(g) = grads.get(*v) {
                    acc_m.add_assign(g);
                }
            }
        }
        let flatten = |ms: Vec<Matrix>| ms.into_iter().flat_map(|m| m.data).collect::<Vec<f64>>();
        Ok((
            acc,
            Gradient {
                shared: flatten(g_shared),
                cost: flatten(g_cost),
            },
        ))
    }

    pub fn shared_flat(&self) -> Vec<f64> {
        self.shared
            .params
            .iter()
            .flat_map(|m| m.data.iter().copied())
            .collect()
    }

    pub fn cost_flat(&self) -> Vec<f64> {
        self.cost_critic
            .params
            .iter()
            .flat_map(|m| m.data.iter().copied())
            .collect()
    }

    /// All parameters, shared tower first.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.shared_flat();
        v.extend(self.cost_flat());
        v
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::Load(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for m in self
            .shared
            .params
            .iter_mut()
            .chain(self.cost_critic.params.iter_mut())
        {
            for v in &mut m.data {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.shared
            .params
            .iter()
            .chain(&self.cost_critic.params)
            .all(Matrix::is_finite)
    }

    pub fn shapes(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        (
            self.shared.params.iter().map(Matrix::shape).collect(),
            self.cost_critic.params.iter().map(Matrix::shape).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::PredictionSet;
    use crate::sim::AgentState;

    fn agent(x: f64, y: f64, vx: f64) -> AgentState {
        AgentState {
            position: Vec2::new(x, y),
            velocity: Vec2::new(vx, 0.1),
            radius: 0.3,
            goal: Vec2::new(-x, -y),
            v_max: 1.0,
        }
    }

    fn observation(h: usize, k: usize) -> Observation {
        let humans: Vec<AgentState> = (0..h)
            .map(|i| {
                agent(
                    (i as f64 * 1.3).sin() * 4.0,
                    (i as f64 * 0.7).cos() * 4.0,
                    0.2 * i as f64,
                )
            })
            .collect();
        let model = humans
            .iter()
            .map(|a| PredictionSet {
                points: (1..=k)
                    .map(|j| a.position + a.velocity * (0.25 * j as f64))
                    .collect(),
                radii: (1..=k).map(|j| 0.1 * j as f64).collect(),
            })
            .collect();
        Observation {
            ego: agent(0.3, -0.2, 0.4),
            humans,
            model,
        }
    }

    #[test]
    fn shapes_at_full_scale() {
        let net = ActorCritic::new(NetworkConfig::default(), 5, 1);
        let f = net.encode(&observation(20, 5)).unwrap();
        assert_eq!(f.humans.shape(), (20, 20));
        let out = net.forward_features(&f).unwrap();
        assert!(out.action_mean.is_finite() && out.value_r.is_finite() && out.value_c.is_finite());
        assert!(out.action_mean.x.abs() <= 1.0 && out.action_mean.y.abs() <= 1.0);
    }

    #[test]
    fn zero_network_outputs_zero_mean() {
        let net = ActorCritic::zeros(NetworkConfig::default(), 5);
        let out = net.forward(&observation(4, 5)).unwrap();
        assert_eq!(out.action_mean, Vec2::ZERO);
        assert_eq!(out.value_r, 0.0);
        assert_eq!(out.value_c, 0.0);
    }

    #[test]
    fn permutation_invariant_exactly() {
        let net = ActorCritic::new(NetworkConfig::default(), 5, 7);
        let a = observation(6, 5);
        let mut b = a.clone();
        b.humans.rotate_left(2);
        b.model.rotate_left(2);
        b.humans.swap(0, 3);
        b.model.swap(0, 3);
        assert_eq!(net.forward(&a).unwrap(), net.forward(&b).unwrap());
    }

    #[test]
    fn no_humans_is_supported() {
        let net = ActorCritic::new(NetworkConfig::default(), 5, 2);
        let out = net.forward(&observation(0, 5)).unwrap();
        assert!(out.value_r.is_finite());
    }

    #[test]
    fn non_finite_parameters_are_reported() {
        let mut net = ActorCritic::new(NetworkConfig::default(), 5, 2);
        net.shared.params[T1_B].data[0] = f64::NAN;
        let err = net.forward(&observation(2, 5)).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("|shared params|")));
    }

    #[test]
    fn flat_round_trip() {
        let net = ActorCritic::new(NetworkConfig::default(), 5, 3);
        let mut other = ActorCritic::zeros(NetworkConfig::default(), 5);
        other.set_flat(&net.flat()).unwrap();
        assert_eq!(net, other);
        assert!(other.set_flat(&[0.0]).is_err());
    }

    #[test]
    fn seeds_control_initialisation() {
        let a = ActorCritic::new(NetworkConfig::default(), 5, 3);
        let b = ActorCritic::new(NetworkConfig::default(), 5, 3);
        let c = ActorCritic::new(NetworkConfig::default(), 5, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
