use serde::{Deserialize, Serialize};

use super::{AcquisitionError, Cost, FeatureCatalog, TerminationRule};

/// The partially observed feature vector of one instance, together with its
/// initial and current acquisition masks.
///
/// `values` is laid out over encoded columns (see [`FeatureCatalog::columns`]);
/// masks are per feature. Unacquired columns hold 0, which after
/// standardization is the training mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionState {
    values: Vec<f64>,
    initial: Vec<bool>,
    acquired: Vec<bool>,
    spent: Cost,
    step: usize,
}

impl AcquisitionState {
    /// Empty state: nothing known, nothing spent.
    pub fn new(catalog: &FeatureCatalog) -> Self {
        AcquisitionState {
            values: vec![0.0; catalog.encoded_width()],
            initial: vec![false; catalog.len()],
            acquired: vec![false; catalog.len()],
            spent: Cost::ZERO,
            step: 0,
        }
    }

    /// Start state where the features flagged in `free` are revealed from
    /// `row` at no charge.
    pub fn start(
        catalog: &FeatureCatalog,
        free: &[bool],
        row: &[f64],
    ) -> Result<Self, AcquisitionError> {
        if free.len() != catalog.len() || row.len() != catalog.encoded_width() {
            return Err(AcquisitionError::DimensionMismatch {
                expected: catalog.len(),
                found: free.len(),
            });
        }
        let mut state = Self::new(catalog);
        for (j, &is_free) in free.iter().enumerate() {
            if is_free {
                let cols = catalog.columns(j);
                state.values[cols.clone()].copy_from_slice(&row[cols]);
                state.initial[j] = true;
                state.acquired[j] = true;
            }
        }
        Ok(state)
    }

    /// Assembles a state from explicit masks, charging `(k - k0)·c`.
    pub fn from_masks(
        catalog: &FeatureCatalog,
        values: Vec<f64>,
        initial: Vec<bool>,
        acquired: Vec<bool>,
    ) -> Result<Self, AcquisitionError> {
        let d = catalog.len();
        if initial.len() != d || acquired.len() != d {
            return Err(AcquisitionError::DimensionMismatch { expected: d, found: acquired.len() });
        }
        if values.len() != catalog.encoded_width() {
            return Err(AcquisitionError::DimensionMismatch {
                expected: catalog.encoded_width(),
                found: values.len(),
            });
        }
        let step = acquired.iter().zip(&initial).filter(|(k, k0)| **k && !**k0).count();
        let mut state = AcquisitionState { values, initial, acquired, spent: Cost::ZERO, step };
        state.spent = state.total_cost(catalog)?;
        state.check_invariants(catalog)?;
        Ok(state)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_mask(&self) -> &[bool] {
        &self.initial
    }

    pub fn mask(&self) -> &[bool] {
        &self.acquired
    }

    pub fn is_acquired(&self, j: usize) -> bool {
        self.acquired[j]
    }

    pub fn spent(&self) -> Cost {
        self.spent
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn num_features(&self) -> usize {
        self.acquired.len()
    }

    pub fn num_acquired(&self) -> usize {
        self.acquired.iter().filter(|&&k| k).count()
    }

    /// Applies the query operator: reveal feature `j` with the given encoded
    /// value(s) and charge its cost. The input state is left untouched.
    pub fn query(
        &self,
        j: usize,
        value: &[f64],
        catalog: &FeatureCatalog,
    ) -> Result<Self, AcquisitionError> {
        let d = self.acquired.len();
        if catalog.len() != d {
            return Err(AcquisitionError::DimensionMismatch { expected: d, found: catalog.len() });
        }
        if j >= d {
            return Err(AcquisitionError::IndexOutOfRange { index: j, len: d });
        }
        if self.acquired[j] {
            return Err(AcquisitionError::AlreadyAcquired(j));
        }
        let cols = catalog.columns(j);
        if value.len() != cols.len() {
            return Err(AcquisitionError::DimensionMismatch {
                expected: cols.len(),
                found: value.len(),
            });
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(AcquisitionError::NonFiniteValue(j));
        }
        let mut next = self.clone();
        next.values[cols].copy_from_slice(value);
        next.acquired[j] = true;
        next.spent = self
            .spent
            .checked_add(catalog.cost(j))
            .ok_or(AcquisitionError::CostOverflow)?;
        next.step += 1;
        Ok(next)
    }

    /// `(k - k0)ᵀ c`, recomputed from the masks.
    pub fn total_cost(&self, catalog: &FeatureCatalog) -> Result<Cost, AcquisitionError> {
        if catalog.len() != self.acquired.len() {
            return Err(AcquisitionError::DimensionMismatch {
                expected: self.acquired.len(),
                found: catalog.len(),
            });
        }
        Ok(self
            .acquired
            .iter()
            .zip(&self.initial)
            .enumerate()
            .filter(|(_, (k, k0))| **k && !**k0)
            .map(|(j, _)| catalog.cost(j))
            .sum())
    }

    /// Indices of features that have not been acquired yet.
    pub fn available_actions(&self) -> Vec<usize> {
        self.acquired
            .iter()
            .enumerate()
            .filter(|(_, &k)| !k)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn is_terminal(
        &self,
        rule: &TerminationRule,
        certainty: f64,
        catalog: &FeatureCatalog,
    ) -> bool {
        rule.is_terminal(self, certainty, catalog)
    }

    /// Per-column mask (1 where the owning feature is acquired).
    pub fn column_mask(&self, catalog: &FeatureCatalog) -> Vec<f64> {
        let mut mask = vec![0.0; catalog.encoded_width()];
        for j in 0..catalog.len() {
            if self.acquired[j] {
                mask[catalog.columns(j)].iter_mut().for_each(|m| *m = 1.0);
            }
        }
        mask
    }

    /// Values followed by the column mask; the input layout of predictors and
    /// Q-networks operating on partial states.
    pub fn masked_input(&self, catalog: &FeatureCatalog) -> Vec<f64> {
        let mut input = self.values.clone();
        input.extend(self.column_mask(catalog));
        input
    }

    pub fn check_invariants(&self, catalog: &FeatureCatalog) -> Result<(), AcquisitionError> {
        let broken = |what: String| Err(AcquisitionError::InvariantViolated(what));
        if self.acquired.len() != catalog.len() || self.values.len() != catalog.encoded_width() {
            return broken("state dimensions do not match the catalog".into());
        }
        for j in 0..catalog.len() {
            if self.initial[j] && !self.acquired[j] {
                return broken(format!("feature {j} is initially known but not acquired"));
            }
            if !self.acquired[j] && self.values[catalog.columns(j)].iter().any(|&v| v != 0.0) {
                return broken(format!("unacquired feature {j} carries a value"));
            }
        }
        let recomputed = self.total_cost(catalog)?;
        if recomputed != self.spent {
            return broken(format!("spent {} but masks imply {}", self.spent, recomputed));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Cost;
    use proptest::prelude::*;

    fn catalog(costs: &[u64]) -> FeatureCatalog {
        FeatureCatalog::real_features(&costs.iter().map(|&c| Cost::from_units(c)).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn query_charges_cost() {
        let cat = catalog(&[2, 4, 9]);
        let s0 = AcquisitionState::new(&cat);
        let s1 = s0.query(1, &[0.5], &cat).unwrap();
        assert_eq!(s1.mask(), &[false, true, false]);
        assert_eq!(s1.values(), &[0.0, 0.5, 0.0]);
        assert_eq!(s1.spent(), Cost::from_units(4));
        assert_eq!(s1.step(), 1);
        // input untouched
        assert_eq!(s0.spent(), Cost::ZERO);
        assert_eq!(s0.mask(), &[false, false, false]);
    }

    #[test]
    fn query_twice_is_rejected() {
        let cat = catalog(&[2, 4, 9]);
        let s1 = AcquisitionState::new(&cat).query(1, &[0.5], &cat).unwrap();
        assert_eq!(s1.query(1, &[0.1], &cat), Err(AcquisitionError::AlreadyAcquired(1)));
        assert!(matches!(
            s1.query(3, &[0.1], &cat),
            Err(AcquisitionError::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn initial_features_are_free() {
        let cat = catalog(&[2, 4, 9]);
        let s = AcquisitionState::start(&cat, &[true, false, false], &[0.7, 0.1, 0.2]).unwrap();
        assert_eq!(s.values(), &[0.7, 0.0, 0.0]);
        let s = s.query(2, &[-1.3], &cat).unwrap();
        assert_eq!(s.spent(), Cost::from_units(9));
        assert_eq!(s.total_cost(&cat).unwrap(), Cost::from_units(9));
    }

    #[test]
    fn total_cost_examples() {
        let cat = catalog(&[2, 4, 9]);
        let s = AcquisitionState::from_masks(
            &cat,
            vec![0.0; 3],
            vec![true, false, false],
            vec![true, true, true],
        )
        .unwrap();
        assert_eq!(s.total_cost(&cat).unwrap(), Cost::from_units(13));
        let s = AcquisitionState::from_masks(&cat, vec![0.0; 3], vec![true, false, false], vec![true, false, false])
            .unwrap();
        assert_eq!(s.total_cost(&cat).unwrap(), Cost::ZERO);

        let cat4 = catalog(&[2, 4, 5, 9]);
        let s = AcquisitionState::from_masks(
            &cat4,
            vec![0.0; 4],
            vec![false; 4],
            vec![true, false, true, false],
        )
        .unwrap();
        assert_eq!(s.total_cost(&cat4).unwrap(), Cost::from_units(7));
        assert!(matches!(s.total_cost(&cat), Err(AcquisitionError::DimensionMismatch { .. })));
    }

    #[test]
    fn available_actions_examples() {
        let cat = catalog(&[1, 1, 1]);
        let s = AcquisitionState::from_masks(&cat, vec![0.0; 3], vec![false; 3], vec![true, false, true]).unwrap();
        assert_eq!(s.available_actions(), vec![1]);
        let s = AcquisitionState::from_masks(&cat, vec![0.0; 3], vec![false; 3], vec![true; 3]).unwrap();
        assert!(s.available_actions().is_empty());
        let cat4 = catalog(&[1, 1, 1, 1]);
        assert_eq!(AcquisitionState::new(&cat4).available_actions(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn categorical_feature_is_one_action() {
        use crate::acquisition::{Category, FeatureKind, FeatureMeta};
        let cat = FeatureCatalog::new(vec![
            FeatureMeta::new("x", FeatureKind::Real, Category::Examination, Cost::from_units(5)),
            FeatureMeta::new("smoke", FeatureKind::Categorical, Category::Questionnaire, Cost::from_units(4))
                .with_width(3),
        ])
        .unwrap();
        let s = AcquisitionState::new(&cat).query(1, &[0.0, 1.0, 0.0], &cat).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.column_mask(&cat), vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.spent(), Cost::from_units(4));
        assert!(s.query(0, &[1.0, 2.0], &cat).is_err());
    }

    proptest! {
        #[test]
        fn trajectories_keep_invariants(
            costs in prop::collection::vec(0u64..20, 1..10),
            order_seed in any::<u64>(),
            values in prop::collection::vec(-3.0f64..3.0, 10),
        ) {
            let cat = catalog(&costs);
            let d = costs.len();
            let mut order: Vec<usize> = (0..d).collect();
            // deterministic shuffle from the seed
            let mut x = order_seed | 1;
            for i in (1..d).rev() {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                order.swap(i, (x % (i as u64 + 1)) as usize);
            }
            let mut state = AcquisitionState::new(&cat);
            let mut logged = Cost::ZERO;
            for (t, &j) in order.iter().enumerate() {
                let next = state.query(j, &[values[j]], &cat).unwrap();
                let flipped: Vec<usize> = (0..d).filter(|&i| next.mask()[i] != state.mask()[i]).collect();
                prop_assert_eq!(flipped, vec![j]);
                prop_assert!(next.spent() >= state.spent());
                logged = logged + cat.cost(j);
                prop_assert_eq!(next.spent(), logged);
                prop_assert_eq!(next.total_cost(&cat).unwrap(), logged);
                prop_assert_eq!(next.step(), t + 1);
                next.check_invariants(&cat).unwrap();
                state = next;
            }
            prop_assert_eq!(state.spent(), cat.total_cost());
        }
    }
}
