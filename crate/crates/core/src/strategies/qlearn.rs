//! Deep Q-learning shared by the cost-penalized and certainty-reward
//! policies.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::{certainty_reward, rl_reward, Action};
use super::{mix_seed, Predictor, StrategyError};
use crate::acquisition::{AcquisitionState, FeatureCatalog};
use crate::data::TaskDataset;
use crate::nn::{train_batch, Activation, AdamConfig, AdamState, DenseNet, Loss, Mode, NnError, Targets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QConfig {
    pub hidden: Vec<usize>,
    pub episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub gamma: f64,
    /// Minimum buffer fill before any update.
    pub warmup: usize,
    pub learning_rate: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            hidden: vec![64, 64],
            episodes: 3000,
            replay_capacity: 10_000,
            batch_size: 64,
            target_sync: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.2,
            gamma: 1.0,
            warmup: 256,
            learning_rate: 1e-3,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let ok = self.episodes > 0
            && self.replay_capacity > 0
            && self.batch_size > 0
            && self.target_sync > 0
            && (0.0..=1.0).contains(&self.epsilon_start)
            && (0.0..=1.0).contains(&self.epsilon_end)
            && (0.0..=1.0).contains(&self.epsilon_decay_fraction)
            && (0.0..=1.0).contains(&self.gamma)
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(StrategyError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.episodes as f64;
        if horizon <= 0.0 || episode as f64 >= horizon {
            return self.epsilon_end;
        }
        let t = episode as f64 / horizon;
        self.epsilon_start + t * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub input: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_input: Vec<f64>,
    pub next_legal: Vec<usize>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Experience> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Best legal action; the lowest index wins ties.
pub fn greedy(q: &[f64], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &a in legal {
        if q[a] > q[best] {
            best = a;
        }
    }
    best
}

pub fn epsilon_greedy(q: &[f64], legal: &[usize], epsilon: f64, rng: &mut impl Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        legal[rng.random_range(0..legal.len())]
    } else {
        greedy(q, legal)
    }
}

/// One temporal-difference step on a sampled minibatch; returns the loss.
pub fn td_update(
    q: &mut DenseNet,
    target: &DenseNet,
    batch: &[&Experience],
    gamma: f64,
    adam: &AdamConfig,
    state: &mut AdamState,
    rng: &mut impl Rng,
) -> Result<f64, StrategyError> {
    let n = batch.len();
    let width = q.input_width();
    let outputs = q.output_width();
    let mut x = Array2::zeros((n, width));
    let mut x_next = Array2::zeros((n, width));
    for (i, e) in batch.iter().enumerate() {
        x.row_mut(i).assign(&ArrayView1::from(&e.input));
        x_next.row_mut(i).assign(&ArrayView1::from(&e.next_input));
    }
    let q_next = target.predict(x_next.view())?;
    let mut y = Array2::zeros((n, outputs));
    let mut w = Array2::zeros((n, outputs));
    for (i, e) in batch.iter().enumerate() {
        let bootstrap = if e.terminal || e.next_legal.is_empty() {
            0.0
        } else {
            e.next_legal.iter().map(|&a| q_next[[i, a]]).fold(f64::NEG_INFINITY, f64::max)
        };
        y[[i, e.action]] = e.reward + gamma * bootstrap;
        w[[i, e.action]] = 1.0;
    }
    match train_batch(q, x.view(), Targets::Values(y.view()), Some(w.view()), Loss::Squared, adam, state, rng) {
        Ok(loss) => Ok(loss),
        Err(NnError::NonFiniteLoss(v)) => Err(StrategyError::DivergedQ(v)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QObjective {
    /// Acquisitions cost `c_j`; a wrong final prediction costs `λ`.
    CostPenalty { lambda: f64 },
    /// Acquisitions earn the certainty change per unit cost.
    CertaintyGain { mc_samples: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QDiagnostics {
    pub episode_returns: Vec<f64>,
    pub mean_td_loss: Vec<f64>,
    pub updates: usize,
}

/// Q-network input for a state.
pub fn q_input(state: &AcquisitionState, catalog: &FeatureCatalog) -> Vec<f64> {
    state.masked_input(catalog)
}

/// Legal actions: every unacquired feature, plus the predict action (index
/// `d`) when the objective has one.
fn legal_actions(state: &AcquisitionState, predict: bool) -> Vec<usize> {
    let mut legal = state.available_actions();
    if predict {
        legal.push(state.num_features());
    }
    legal
}

pub fn new_q_net(catalog: &FeatureCatalog, objective: QObjective, cfg: &QConfig, seed: u64) -> Result<DenseNet, StrategyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outputs = catalog.len() + usize::from(matches!(objective, QObjective::CostPenalty { .. }));
    Ok(DenseNet::mlp(2 * catalog.encoded_width(), &cfg.hidden, 0.0, outputs, Activation::Identity, &mut rng)?)
}

/// Episodic ε-greedy training with experience replay and a periodically
/// synced target network.
pub fn train_q(
    objective: QObjective,
    predictor: &Predictor,
    ds: &TaskDataset,
    rows: &[usize],
    cfg: &QConfig,
    seed: u64,
) -> Result<(DenseNet, QDiagnostics), StrategyError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(StrategyError::InvalidConfig("no training rows".into()));
    }
    let catalog = &ds.catalog;
    let d = catalog.len();
    if let QObjective::CertaintyGain { mc_samples } = objective {
        if mc_samples == 0 {
            return Err(StrategyError::InvalidConfig("mc_samples must be positive".into()));
        }
        if let Some(j) = (0..d).find(|&j| catalog.cost(j).is_zero()) {
            return Err(StrategyError::ZeroCost(j));
        }
    }
    let predict_action = matches!(objective, QObjective::CostPenalty { .. });
    let mut q = new_q_net(catalog, objective, cfg, mix_seed(seed, 1))?;
    let mut target = q.clone();
    let adam = AdamConfig { batch_size: cfg.batch_size, ..AdamConfig::default().with_learning_rate(cfg.learning_rate) };
    let mut adam_state = AdamState::new(&q);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut diag = QDiagnostics::default();
    let mut steps = 0usize;

    for episode in 0..cfg.episodes {
        let r = rows[rng.random_range(0..rows.len())];
        let row = ds.row(r);
        let label = ds.labels[r];
        let eps = cfg.epsilon(episode);
        let mut state = AcquisitionState::new(catalog);
        let mut ret = 0.0;
        let mut losses = Vec::new();
        loop {
            let legal = legal_actions(&state, predict_action);
            if legal.is_empty() {
                break;
            }
            let input = q_input(&state, catalog);
            let qv = q.forward(&input, Mode::Eval, 0)?;
            let a = epsilon_greedy(&qv, &legal, eps, &mut rng);
            let (reward, next, terminal) = if a == d {
                let pred = predictor.predict(&state, catalog)?;
                (rl_reward(Action::Predict(pred), label, lambda_of(objective), catalog), None, true)
            } else {
                let cols = catalog.columns(a);
                let next = state.query(a, &row[cols], catalog)?;
                let reward = match objective {
                    QObjective::CostPenalty { lambda } => rl_reward(Action::Acquire(a), label, lambda, catalog),
                    QObjective::CertaintyGain { mc_samples } => {
                        let s = mix_seed(seed, (episode as u64) << 20 | state.step() as u64);
                        let before = predictor.certainty(&state, catalog, mc_samples, s)?.certainty;
                        let after = predictor.certainty(&next, catalog, mc_samples, s)?.certainty;
                        certainty_reward(before, after, catalog.cost(a).as_f64())
                    }
                };
                let terminal = !predict_action && next.available_actions().is_empty();
                (reward, Some(next), terminal)
            };
            ret += reward;
            let (next_input, next_legal) = match &next {
                Some(s) if !terminal => (q_input(s, catalog), legal_actions(s, predict_action)),
                _ => (vec![0.0; input.len()], Vec::new()),
            };
            buffer.push(Experience { input, action: a, reward, next_input, next_legal, terminal });
            steps += 1;
            if buffer.len() >= cfg.warmup.max(1) {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                losses.push(td_update(&mut q, &target, &batch, cfg.gamma, &adam, &mut adam_state, &mut rng)?);
                diag.updates += 1;
            }
            if steps.is_multiple_of(cfg.target_sync) {
                target = q.clone();
            }
            match next {
                Some(s) if !terminal => state = s,
                _ => break,
            }
        }
        diag.episode_returns.push(ret);
        diag.mean_td_loss.push(if losses.is_empty() { f64::NAN } else { losses.iter().sum::<f64>() / losses.len() as f64 });
    }
    Ok((q, diag))
}

fn lambda_of(objective: QObjective) -> f64 {
    match objective {
        QObjective::CostPenalty { lambda } => lambda,
        QObjective::CertaintyGain { .. } => 0.0,
    }
}
