use serde::{Deserialize, Serialize};

use super::{AcquisitionError, AcquisitionState, Cost, FeatureCatalog};

/// When an episode stops acquiring features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationRule {
    /// Inclusive per-instance spending cap. Fires once no remaining feature
    /// fits into what is left of the budget.
    Budget(Cost),
    /// Fires when prediction certainty reaches the threshold.
    Confidence(f64),
    AllAcquired,
    /// Fires when any member fires.
    Composite(Vec<TerminationRule>),
}

impl TerminationRule {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        match self {
            TerminationRule::Confidence(t) if !(0.0..=1.0).contains(t) => Err(
                AcquisitionError::InvalidRule(format!("confidence threshold {t} outside [0, 1]")),
            ),
            TerminationRule::Composite(rules) => rules.iter().try_for_each(|r| r.validate()),
            _ => Ok(()),
        }
    }

    pub fn is_terminal(
        &self,
        state: &AcquisitionState,
        certainty: f64,
        catalog: &FeatureCatalog,
    ) -> bool {
        match self {
            TerminationRule::Budget(budget) => {
                let cheapest = state
                    .available_actions()
                    .into_iter()
                    .map(|j| catalog.cost(j))
                    .min();
                match cheapest {
                    None => true,
                    Some(c) => state.spent().saturating_add(c) > *budget,
                }
            }
            TerminationRule::Confidence(threshold) => certainty >= *threshold,
            TerminationRule::AllAcquired => state.available_actions().is_empty(),
            TerminationRule::Composite(rules) => {
                rules.iter().any(|r| r.is_terminal(state, certainty, catalog))
            }
        }
    }

    /// Tightest budget imposed anywhere in the rule, if any.
    pub fn budget(&self) -> Option<Cost> {
        match self {
            TerminationRule::Budget(b) => Some(*b),
            TerminationRule::Composite(rules) => rules.iter().filter_map(|r| r.budget()).min(),
            _ => None,
        }
    }

    pub fn needs_certainty(&self) -> bool {
        match self {
            TerminationRule::Confidence(_) => true,
            TerminationRule::Composite(rules) => rules.iter().any(|r| r.needs_certainty()),
            _ => false,
        }
    }

    /// Unacquired features whose purchase keeps spending within the budget.
    pub fn affordable(&self, state: &AcquisitionState, catalog: &FeatureCatalog) -> Vec<usize> {
        let budget = self.budget();
        state
            .available_actions()
            .into_iter()
            .filter(|&j| match budget {
                Some(b) => state.spent().saturating_add(catalog.cost(j)) <= b,
                None => true,
            })
            .collect()
    }
}
