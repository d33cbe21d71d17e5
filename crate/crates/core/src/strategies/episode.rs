use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, DecideOptions, Decision, Strategy, StrategyError};
use crate::acquisition::{AcquisitionState, Cost, TerminationRule, TrajectoryRecord};
use crate::data::TaskDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub rule: TerminationRule,
    /// Features revealed for free at the start (`k^0`); none by default.
    pub initial: Option<Vec<bool>>,
    pub policy: usize,
    pub allow_early_stop: bool,
    pub mc_samples: usize,
    pub seed: u64,
}

impl EpisodeOptions {
    pub fn new(rule: TerminationRule, seed: u64) -> Self {
        EpisodeOptions {
            rule,
            initial: None,
            policy: 0,
            allow_early_stop: true,
            mc_samples: crate::nn::DEFAULT_MC_SAMPLES,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The termination rule fired.
    Rule,
    /// The policy chose to stop.
    Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub row: usize,
    pub order: Vec<usize>,
    pub step_costs: Vec<Cost>,
    pub prediction: usize,
    pub label: usize,
    pub correct: bool,
    pub total_cost: Cost,
    pub stop: StopReason,
}

/// Runs one acquisition episode on dataset row `row`. Values of features
/// missing from the data are revealed as zero (the training mean).
pub fn run_episode(
    strategy: &Strategy,
    ds: &TaskDataset,
    row: usize,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult, StrategyError> {
    let catalog = &ds.catalog;
    let values = ds.row(row);
    let mut state = match &opts.initial {
        Some(free) => AcquisitionState::start(catalog, free, values)?,
        None => AcquisitionState::new(catalog),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, row as u64));
    let decide = DecideOptions { policy: opts.policy, allow_early_stop: opts.allow_early_stop };
    let mut order = Vec::new();
    let mut step_costs = Vec::new();
    let stop = loop {
        let certainty = if opts.rule.needs_certainty() {
            strategy.certainty(&state, catalog, opts.mc_samples, mix_seed(opts.seed, state.step() as u64))?
        } else {
            0.0
        };
        if opts.rule.is_terminal(&state, certainty, catalog) {
            break StopReason::Rule;
        }
        let candidates = opts.rule.affordable(&state, catalog);
        if candidates.is_empty() {
            break StopReason::Rule;
        }
        match strategy.decide(&state, &candidates, catalog, decide, &mut rng)? {
            Decision::Stop => break StopReason::Policy,
            Decision::Acquire(j) => {
                state = state.query(j, &values[catalog.columns(j)], catalog)?;
                order.push(j);
                step_costs.push(catalog.cost(j));
            }
        }
    };
    let total_cost = state.total_cost(catalog)?;
    debug_assert_eq!(total_cost, state.spent());
    let prediction = strategy.predict(&state, catalog)?;
    let label = ds.labels[row];
    Ok(EpisodeResult { row, order, step_costs, prediction, label, correct: prediction == label, total_cost, stop })
}

/// Trajectory-log rows of one episode.
pub fn to_records(episode_id: u64, result: &EpisodeResult) -> Vec<TrajectoryRecord> {
    let mut spent = Cost::ZERO;
    result
        .order
        .iter()
        .zip(&result.step_costs)
        .enumerate()
        .map(|(step, (&j, &c))| {
            spent = spent + c;
            TrajectoryRecord { episode_id, step, feature_index: j, cost: c, spent_after: spent }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::replay_costs;
    use crate::data::synthetic::informative_task;
    use crate::strategies::{Predictor, PredictorConfig};

    fn setup() -> (TaskDataset, Predictor) {
        let ds = informative_task(200, 3).unwrap();
        let cfg = PredictorConfig { epochs: 2, hidden: vec![8], ..Default::default() };
        let (p, _) = Predictor::train(&ds, &ds.splits.train, &cfg, 1).unwrap();
        (ds, p)
    }

    #[test]
    fn zero_budget_acquires_nothing() {
        let (ds, p) = setup();
        let s = Strategy::Random { seed: 0, predictor: p.clone() };
        let r = run_episode(&s, &ds, 0, &EpisodeOptions::new(TerminationRule::Budget(Cost::ZERO), 1)).unwrap();
        assert!(r.order.is_empty());
        assert_eq!(r.total_cost, Cost::ZERO);
        assert_eq!(r.prediction, p.predict(&AcquisitionState::new(&ds.catalog), &ds.catalog).unwrap());
    }

    #[test]
    fn all_acquired_is_permutation() {
        let (ds, p) = setup();
        let s = Strategy::Random { seed: 0, predictor: p };
        let r = run_episode(&s, &ds, 5, &EpisodeOptions::new(TerminationRule::AllAcquired, 2)).unwrap();
        let mut o = r.order.clone();
        o.sort_unstable();
        assert_eq!(o, (0..ds.num_features()).collect::<Vec<_>>());
        assert_eq!(r.total_cost, ds.catalog.total_cost());
        let replay = replay_costs(&to_records(9, &r)).unwrap();
        assert_eq!(replay[&9], r.total_cost);
    }

    #[test]
    fn random_respects_budget() {
        let (ds, p) = setup();
        let s = Strategy::Random { seed: 0, predictor: p };
        for b in 0..6 {
            let opts = EpisodeOptions::new(TerminationRule::Budget(Cost::from_units(b)), b);
            for row in 0..20 {
                let r = run_episode(&s, &ds, row, &opts).unwrap();
                assert!(r.total_cost <= Cost::from_units(b));
            }
        }
    }

    #[test]
    fn static_order_follows_permutation() {
        let (ds, p) = setup();
        let order: Vec<usize> = (0..ds.num_features()).rev().collect();
        let s = Strategy::StaticOrder { order: order.clone(), predictor: p };
        let r = run_episode(&s, &ds, 1, &EpisodeOptions::new(TerminationRule::AllAcquired, 0)).unwrap();
        assert_eq!(r.order, order);
    }
}
