//! Acquisition policies. Each maps a partial state to "acquire feature j" or
//! "stop and predict".

pub mod episode;
pub mod exhaustive;
pub mod fact;
pub mod predictor;
pub mod qlearn;
pub mod reward;

pub use episode::{run_episode, to_records, EpisodeOptions, EpisodeResult, StopReason};
pub use exhaustive::{ExhaustiveModel, FeatureBins};
pub use fact::{FactConfig, FactModel};
pub use predictor::{masked_row, random_masks, Predictor, PredictorConfig};
pub use qlearn::{train_q, QConfig, QDiagnostics, QObjective};
pub use reward::{certainty_reward, ol_reward, rl_reward, Action, Transition};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{AcquisitionError, AcquisitionState, FeatureCatalog};
use crate::data::{DataError, TaskDataset};
use crate::nn::{argmax, DenseNet, Mode, NnError};

pub const CHECKPOINT_FORMAT: &str = "costsense-strategy";
pub const STRATEGY_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("reference store is empty")]
    EmptyStore,
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("feature {0} has zero cost")]
    ZeroCost(usize),
    #[error("temporal-difference loss diverged ({0})")]
    DivergedQ(f64),
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// SplitMix64 finalizer over a pair of values, for deriving per-episode
/// and per-step seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Candidates ordered by utility per unit cost, best first. Costs enter as
/// ratios to the cheapest candidate so that rescaling every cost leaves the
/// order untouched. Free candidates outrank all others; ties keep the lower
/// index first.
pub fn rank_candidates(candidates: &[usize], utilities: &[f64], catalog: &FeatureCatalog) -> Vec<usize> {
    let any_free = candidates.iter().any(|&j| catalog.cost(j).is_zero());
    let c_min = candidates
        .iter()
        .map(|&j| catalog.cost(j).micros())
        .filter(|&m| m > 0)
        .min()
        .unwrap_or(1) as f64;
    let mut scored: Vec<(bool, f64, usize)> = candidates
        .iter()
        .zip(utilities)
        .map(|(&j, &u)| {
            let c = catalog.cost(j).micros();
            if c == 0 {
                (true, u, j)
            } else {
                (false, if any_free { f64::NEG_INFINITY } else { u / (c as f64 / c_min) }, j)
            }
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().map(|(_, _, j)| j).collect()
}

pub fn pick_best(candidates: &[usize], utilities: &[f64], catalog: &FeatureCatalog) -> Option<usize> {
    rank_candidates(candidates, utilities, catalog).first().copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Acquire(usize),
    Stop,
}

fn default_bins() -> usize {
    10
}

fn default_neighbors() -> usize {
    50
}

fn default_lambdas() -> Vec<f64> {
    vec![0.1, 0.3, 1.0, 3.0, 10.0, 30.0]
}

fn default_mc() -> usize {
    crate::nn::DEFAULT_MC_SAMPLES
}

/// Q-learning defaults for the certainty-reward policy: a shorter horizon
/// than the cost-penalty policy.
pub fn ol_q_defaults() -> QConfig {
    QConfig { gamma: 0.5, ..QConfig::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyConfig {
    Exhaustive {
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_neighbors")]
        neighbors: usize,
    },
    Fact(FactConfig),
    #[serde(rename = "rl", alias = "rl-based")]
    RlBased {
        #[serde(default = "default_lambdas")]
        lambdas: Vec<f64>,
        #[serde(default)]
        q: QConfig,
    },
    Ol {
        #[serde(default = "default_mc")]
        mc_samples: usize,
        #[serde(default)]
        delta: f64,
        #[serde(default = "ol_q_defaults")]
        q: QConfig,
    },
    Random {
        #[serde(default)]
        seed: u64,
    },
    StaticOrder {
        #[serde(default)]
        order: Option<Vec<usize>>,
    },
}

impl StrategyConfig {
    pub const NAMES: [&'static str; 6] = ["exhaustive", "fact", "rl", "ol", "random", "static-order"];

    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "exhaustive" => StrategyConfig::Exhaustive { bins: default_bins(), neighbors: default_neighbors() },
            "fact" => StrategyConfig::Fact(FactConfig::default()),
            "rl" | "rl-based" => StrategyConfig::RlBased { lambdas: default_lambdas(), q: QConfig::default() },
            "ol" => StrategyConfig::Ol { mc_samples: default_mc(), delta: 0.0, q: ol_q_defaults() },
            "random" => StrategyConfig::Random { seed: 0 },
            "static-order" => StrategyConfig::StaticOrder { order: None },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Exhaustive { .. } => "exhaustive",
            StrategyConfig::Fact(_) => "fact",
            StrategyConfig::RlBased { .. } => "rl",
            StrategyConfig::Ol { .. } => "ol",
            StrategyConfig::Random { .. } => "random",
            StrategyConfig::StaticOrder { .. } => "static-order",
        }
    }

    pub fn validate(&self, num_features: usize) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidConfig(m));
        match self {
            StrategyConfig::Exhaustive { bins, neighbors } if *bins == 0 || *neighbors == 0 => {
                bad("bins and neighbors must be positive".into())
            }
            StrategyConfig::Fact(c) if c.levels == 0 || c.levels > 52 => bad(format!("levels {}", c.levels)),
            StrategyConfig::RlBased { lambdas, q } => {
                if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return bad(format!("lambdas {lambdas:?}"));
                }
                q.validate()
            }
            StrategyConfig::Ol { mc_samples, delta, q } => {
                if *mc_samples == 0 || !(delta.is_finite() && *delta >= 0.0) {
                    return bad(format!("mc_samples {mc_samples}, delta {delta}"));
                }
                q.validate()
            }
            StrategyConfig::StaticOrder { order: Some(order) } => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..num_features).collect::<Vec<_>>() {
                    return bad(format!("order {order:?} is not a permutation of 0..{num_features}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlPolicy {
    pub lambda: f64,
    pub net: DenseNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    Exhaustive(ExhaustiveModel),
    Fact(FactModel),
    #[serde(rename = "rl", alias = "rl-based")]
    RlBased { predictor: Predictor, policies: Vec<RlPolicy> },
    Ol { predictor: Predictor, qnet: DenseNet, delta: f64, mc_samples: usize },
    Random { seed: u64, predictor: Predictor },
    StaticOrder { order: Vec<usize>, predictor: Predictor },
}

/// Per-call options for [`Strategy::decide`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecideOptions {
    /// Index into the λ grid of a cost-penalty strategy.
    pub policy: usize,
    /// When false, policy-initiated stopping is disabled and only the
    /// termination rule ends an episode.
    pub allow_early_stop: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions { policy: 0, allow_early_stop: true }
    }
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Exhaustive(_) => "exhaustive",
            Strategy::Fact(_) => "fact",
            Strategy::RlBased { .. } => "rl",
            Strategy::Ol { .. } => "ol",
            Strategy::Random { .. } => "random",
            Strategy::StaticOrder { .. } => "static-order",
        }
    }

    /// λ values of a cost-penalty strategy; empty otherwise.
    pub fn lambdas(&self) -> Vec<f64> {
        match self {
            Strategy::RlBased { policies, .. } => policies.iter().map(|p| p.lambda).collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_trained(&self) -> bool {
        match self {
            Strategy::Fact(m) => m.trained,
            Strategy::RlBased { policies, .. } => !policies.is_empty(),
            _ => true,
        }
    }

    /// Next action among `candidates` (the affordable, unacquired features).
    pub fn decide(
        &self,
        state: &AcquisitionState,
        candidates: &[usize],
        catalog: &FeatureCatalog,
        opts: DecideOptions,
        rng: &mut impl Rng,
    ) -> Result<Decision, StrategyError> {
        if candidates.is_empty() {
            return Ok(Decision::Stop);
        }
        let choice = match self {
            Strategy::Exhaustive(m) => m.select(state, candidates, catalog)?,
            Strategy::Fact(m) => m.select(state, candidates, catalog)?,
            Strategy::RlBased { policies, .. } => {
                let policy = policies.get(opts.policy).ok_or(StrategyError::UntrainedModel)?;
                let q = policy.net.forward(&qlearn::q_input(state, catalog), Mode::Eval, 0)?;
                let mut legal = candidates.to_vec();
                if opts.allow_early_stop {
                    legal.push(catalog.len());
                }
                let a = qlearn::greedy(&q, &legal);
                (a < catalog.len()).then_some(a)
            }
            Strategy::Ol { qnet, delta, .. } => {
                let q = qnet.forward(&qlearn::q_input(state, catalog), Mode::Eval, 0)?;
                let a = qlearn::greedy(&q, candidates);
                (!opts.allow_early_stop || q[a] >= *delta).then_some(a)
            }
            Strategy::Random { .. } => Some(candidates[rng.random_range(0..candidates.len())]),
            Strategy::StaticOrder { order, .. } => order.iter().copied().find(|j| candidates.contains(j)),
        };
        Ok(choice.map_or(Decision::Stop, Decision::Acquire))
    }

    fn predictor(&self) -> Option<&Predictor> {
        match self {
            Strategy::Exhaustive(m) => Some(&m.predictor),
            Strategy::Fact(_) => None,
            Strategy::RlBased { predictor, .. }
            | Strategy::Ol { predictor, .. }
            | Strategy::Random { predictor, .. }
            | Strategy::StaticOrder { predictor, .. } => Some(predictor),
        }
    }

    pub fn probs(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<Vec<f64>, StrategyError> {
        match self {
            Strategy::Fact(m) => m.probs(state, catalog),
            _ => self.predictor().expect("predictor").probs(state, catalog),
        }
    }

    pub fn predict(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Result<usize, StrategyError> {
        Ok(argmax(&self.probs(state, catalog)?))
    }

    /// MC-dropout certainty of the strategy's classifier; plain top-class
    /// probability for classifiers without dropout.
    pub fn certainty(
        &self,
        state: &AcquisitionState,
        catalog: &FeatureCatalog,
        samples: usize,
        seed: u64,
    ) -> Result<f64, StrategyError> {
        match self {
            Strategy::Fact(m) => Ok(m.probs(state, catalog)?.into_iter().fold(0.0, f64::max)),
            _ => Ok(self.predictor().expect("predictor").certainty(state, catalog, samples, seed)?.certainty),
        }
    }

    /// Accuracy of the strategy's classifier on fully observed rows.
    pub fn full_accuracy(&self, ds: &TaskDataset, rows: &[usize]) -> Result<f64, StrategyError> {
        match self {
            Strategy::Fact(m) => m.full_accuracy(ds, rows),
            _ => self.predictor().expect("predictor").full_accuracy(ds, rows),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// One entry per trained Q-network.
    pub q_diagnostics: Vec<QDiagnostics>,
}

/// Exhaustive utilities at the empty state, ranked per unit cost.
pub fn utility_order(model: &ExhaustiveModel, catalog: &FeatureCatalog) -> Result<Vec<usize>, StrategyError> {
    let state = AcquisitionState::new(catalog);
    let all: Vec<usize> = (0..catalog.len()).collect();
    let u = model.utilities(&state, &all, catalog)?;
    Ok(rank_candidates(&all, &u, catalog))
}

/// Fits a strategy on the given training rows. Strategies that classify with
/// the masked predictor share `predictor`.
pub fn train_strategy(
    config: &StrategyConfig,
    ds: &TaskDataset,
    rows: &[usize],
    predictor: &Predictor,
    seed: u64,
) -> Result<(Strategy, TrainReport), StrategyError> {
    config.validate(ds.num_features())?;
    let mut report = TrainReport::default();
    let strategy = match config {
        StrategyConfig::Exhaustive { bins, neighbors } => {
            Strategy::Exhaustive(ExhaustiveModel::fit(predictor.clone(), ds, rows, *bins, *neighbors)?)
        }
        StrategyConfig::Fact(cfg) => Strategy::Fact(FactModel::train(ds, rows, cfg, seed)?),
        StrategyConfig::RlBased { lambdas, q } => {
            let mut policies = Vec::with_capacity(lambdas.len());
            for (i, &lambda) in lambdas.iter().enumerate() {
                let (net, diag) =
                    train_q(QObjective::CostPenalty { lambda }, predictor, ds, rows, q, mix_seed(seed, i as u64))?;
                log::info!("rl λ={lambda}: {} updates", diag.updates);
                report.q_diagnostics.push(diag);
                policies.push(RlPolicy { lambda, net });
            }
            Strategy::RlBased { predictor: predictor.clone(), policies }
        }
        StrategyConfig::Ol { mc_samples, delta, q } => {
            let (qnet, diag) =
                train_q(QObjective::CertaintyGain { mc_samples: *mc_samples }, predictor, ds, rows, q, seed)?;
            log::info!("ol: {} updates", diag.updates);
            report.q_diagnostics.push(diag);
            Strategy::Ol { predictor: predictor.clone(), qnet, delta: *delta, mc_samples: *mc_samples }
        }
        StrategyConfig::Random { seed } => Strategy::Random { seed: *seed, predictor: predictor.clone() },
        StrategyConfig::StaticOrder { order } => {
            let order = match order {
                Some(o) => o.clone(),
                None => {
                    let model = ExhaustiveModel::fit(predictor.clone(), ds, rows, default_bins(), default_neighbors())?;
                    utility_order(&model, &ds.catalog)?
                }
            };
            Strategy::StaticOrder { order, predictor: predictor.clone() }
        }
    };
    Ok((strategy, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: StrategyConfig,
    pub strategy: Strategy,
}

impl StrategyCheckpoint {
    pub fn new(config: StrategyConfig, strategy: Strategy) -> Self {
        StrategyCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: STRATEGY_CHECKPOINT_VERSION,
            config,
            strategy,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, StrategyError> {
        let ck: StrategyCheckpoint =
            serde_json::from_str(text).map_err(|e| StrategyError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != STRATEGY_CHECKPOINT_VERSION {
            return Err(StrategyError::Checkpoint(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        if ck.config.name() != ck.strategy.name() {
            return Err(StrategyError::Checkpoint("config and strategy kinds disagree".into()));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Cost;

    fn catalog(costs: &[u64]) -> FeatureCatalog {
        FeatureCatalog::real_features(&costs.iter().map(|&c| Cost::from_units(c)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn per_cost_selection() {
        let cat = catalog(&[2, 4]);
        assert_eq!(pick_best(&[0, 1], &[0.2, 0.2], &cat), Some(0));
        assert_eq!(pick_best(&[0, 1], &[0.1, 0.4], &cat), Some(1));
        let cat = catalog(&[1, 1, 1]);
        assert_eq!(pick_best(&[2, 1], &[0.5, 0.5], &cat), Some(1));
        assert_eq!(pick_best(&[2], &[0.0], &cat), Some(2));
        assert_eq!(pick_best(&[], &[], &cat), None);
    }

    #[test]
    fn free_features_rank_first() {
        let cat = catalog(&[0, 1, 0]);
        assert_eq!(rank_candidates(&[0, 1, 2], &[0.1, 9.0, 0.3], &cat), vec![2, 0, 1]);
    }

    #[test]
    fn static_order_must_be_permutation() {
        assert!(StrategyConfig::StaticOrder { order: Some(vec![1, 0, 2]) }.validate(3).is_ok());
        assert!(StrategyConfig::StaticOrder { order: Some(vec![1, 1, 2]) }.validate(3).is_err());
        assert!(StrategyConfig::StaticOrder { order: Some(vec![0, 1]) }.validate(3).is_err());
    }

    #[test]
    fn config_round_trip() {
        for name in StrategyConfig::NAMES {
            let c = StrategyConfig::default_for(name).unwrap();
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<StrategyConfig>(&json).unwrap(), c);
            let toml_text = toml::to_string(&c).unwrap();
            assert_eq!(toml::from_str::<StrategyConfig>(&toml_text).unwrap(), c);
        }
        let c: StrategyConfig = serde_json::from_str(r#"{"kind":"ol"}"#).unwrap();
        assert_eq!(c, StrategyConfig::default_for("ol").unwrap());
    }

    #[test]
    fn seeds_mix() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_eq!(mix_seed(5, 6), mix_seed(5, 6));
    }
}
