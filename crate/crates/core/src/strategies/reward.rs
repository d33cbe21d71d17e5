use serde::{Deserialize, Serialize};

use super::{Predictor, StrategyError};
use crate::acquisition::{AcquisitionState, FeatureCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Acquire(usize),
    Predict(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state_before: AcquisitionState,
    pub action: Action,
    pub reward: f64,
    pub state_after: AcquisitionState,
    pub terminal: bool,
}

/// Cost-penalized classification reward: `-c_j` for an acquisition, 0 for a
/// correct prediction, `-λ` for a wrong one.
pub fn rl_reward(action: Action, label: usize, lambda: f64, catalog: &FeatureCatalog) -> f64 {
    match action {
        Action::Acquire(j) => -catalog.cost(j).as_f64(),
        Action::Predict(c) if c == label => 0.0,
        Action::Predict(_) => -lambda,
    }
}

/// Certainty change caused by revealing feature `j`, per unit cost. Both
/// certainties use the same dropout seed.
pub fn ol_reward(
    state: &AcquisitionState,
    j: usize,
    value: &[f64],
    predictor: &Predictor,
    catalog: &FeatureCatalog,
    samples: usize,
    seed: u64,
) -> Result<f64, StrategyError> {
    let cost = catalog.cost(j);
    if cost.is_zero() {
        return Err(StrategyError::ZeroCost(j));
    }
    let after = state.query(j, value, catalog)?;
    let before = predictor.certainty(state, catalog, samples, seed)?.certainty;
    let after = predictor.certainty(&after, catalog, samples, seed)?.certainty;
    Ok(certainty_reward(before, after, cost.as_f64()))
}

pub fn certainty_reward(before: f64, after: f64, cost: f64) -> f64 {
    (after - before).abs() / cost
}
