use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use costsense::acquisition::{AcquisitionState, Category, Cost, FeatureCatalog, FeatureKind, FeatureMeta};
use costsense::data::TaskDataset;
use costsense::nn::{Activation, DenseNet};
use costsense::strategies::{
    train_strategy, DecideOptions, Decision, ExhaustiveModel, FactConfig, Predictor, PredictorConfig, Strategy,
    StrategyConfig,
};

fn coded_catalog() -> FeatureCatalog {
    FeatureCatalog::new(
        ["a", "b"]
            .iter()
            .map(|n| FeatureMeta::new(*n, FeatureKind::Categorical, Category::Questionnaire, Cost::from_units(1)).with_width(2))
            .collect(),
    )
    .unwrap()
}

fn one_hot(v: usize) -> [f64; 2] {
    let mut o = [0.0; 2];
    o[v] = 1.0;
    o
}

/// Store rows expanded from a joint count table over two binary codes.
fn joint_store(counts: [[usize; 2]; 2]) -> Array2<f64> {
    let mut rows = Vec::new();
    for (a, row) in counts.iter().enumerate() {
        for (b, &n) in row.iter().enumerate() {
            for _ in 0..n {
                rows.extend(one_hot(a));
                rows.extend(one_hot(b));
            }
        }
    }
    Array2::from_shape_vec((rows.len() / 4, 4), rows).unwrap()
}

/// Class probabilities for explicit (value, observed) pairs, built without
/// any of the state machinery.
fn probs(p: &Predictor, a: Option<usize>, b: Option<usize>) -> Vec<f64> {
    let mut input = vec![0.0; 8];
    for (k, v) in [a, b].into_iter().enumerate() {
        if let Some(v) = v {
            input[2 * k + v] = 1.0;
            input[4 + 2 * k] = 1.0;
            input[4 + 2 * k + 1] = 1.0;
        }
    }
    p.probs_input(&input).unwrap()
}

fn l1(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

#[test]
fn exhaustive_matches_joint_table_enumeration() {
    let counts = [[30, 10], [5, 55]];
    let catalog = coded_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = DenseNet::mlp(8, &[6], 0.0, 3, Activation::Softmax, &mut rng).unwrap();
    let predictor = Predictor { net, num_classes: 3 };
    let store = joint_store(counts);
    let observed = Array2::ones((store.nrows(), 2));
    // Exactly the rows sharing a = 1 are the nearest neighbors of a = 1.
    let model = ExhaustiveModel::from_store(predictor.clone(), &catalog, store, observed, 10, 60).unwrap();
    let n: usize = counts.iter().flatten().sum();

    let empty = AcquisitionState::new(&catalog);
    let base = probs(&predictor, None, None);
    let marg_a = [40.0 / n as f64, 60.0 / n as f64];
    let marg_b = [35.0 / n as f64, 65.0 / n as f64];
    let oracle_a: f64 = (0..2).map(|v| marg_a[v] * l1(&probs(&predictor, Some(v), None), &base)).sum();
    let oracle_b: f64 = (0..2).map(|v| marg_b[v] * l1(&probs(&predictor, None, Some(v)), &base)).sum();
    assert!((model.utility(&empty, 0, &catalog).unwrap() - oracle_a).abs() < 1e-9);
    assert!((model.utility(&empty, 1, &catalog).unwrap() - oracle_b).abs() < 1e-9);

    let known = empty.query(0, &one_hot(1), &catalog).unwrap();
    let base = probs(&predictor, Some(1), None);
    let cond_b = [5.0 / 60.0, 55.0 / 60.0];
    let oracle: f64 = (0..2).map(|v| cond_b[v] * l1(&probs(&predictor, Some(1), Some(v)), &base)).sum();
    assert!((model.utility(&known, 1, &catalog).unwrap() - oracle).abs() < 1e-9);
}

#[test]
fn exhaustive_utility_is_zero_for_ignored_feature() {
    let catalog = coded_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = DenseNet::mlp(8, &[5], 0.0, 2, Activation::Softmax, &mut rng).unwrap();
    for c in [2, 3, 6, 7] {
        net.layers_mut()[0].weight.column_mut(c).fill(0.0);
    }
    let predictor = Predictor { net, num_classes: 2 };
    let store = joint_store([[10, 20], [30, 40]]);
    let observed = Array2::ones((store.nrows(), 2));
    let model = ExhaustiveModel::from_store(predictor, &catalog, store, observed, 10, 50).unwrap();
    let empty = AcquisitionState::new(&catalog);
    assert_eq!(model.utility(&empty, 1, &catalog).unwrap(), 0.0);
    assert!(model.utility(&empty, 0, &catalog).unwrap() > 0.0);
}

#[test]
fn degenerate_distribution_gives_the_bin_utility() {
    let catalog = coded_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = DenseNet::mlp(8, &[5], 0.0, 2, Activation::Softmax, &mut rng).unwrap();
    let predictor = Predictor { net, num_classes: 2 };
    let store = joint_store([[10, 20], [30, 40]]);
    let observed = Array2::ones((store.nrows(), 2));
    let model = ExhaustiveModel::from_store(predictor.clone(), &catalog, store, observed, 10, 50).unwrap();
    let empty = AcquisitionState::new(&catalog);
    let before = probs(&predictor, None, None);
    let got = model.utility_given(&empty, 0, &catalog, &[0.0, 1.0], &before).unwrap();
    assert!((got - l1(&probs(&predictor, Some(1), None), &before)).abs() < 1e-12);
}

/// Three real features: a strong signal, a weaker one and noise, with
/// unequal costs.
fn three_feature_task(n: usize, seed: u64) -> TaskDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(normal));
    let labels = (0..n)
        .map(|i| usize::from(2.0 * x[[i, 0]] + x[[i, 1]] + 0.3 * rng.sample::<f64, _>(normal) > 0.0))
        .collect();
    let catalog = FeatureCatalog::real_features(&[2, 1, 1].map(Cost::from_units)).unwrap();
    TaskDataset::from_dense("three", catalog, x, labels, 2, seed).unwrap()
}

fn first_choice(s: &Strategy, state: &AcquisitionState, catalog: &FeatureCatalog) -> Option<usize> {
    let candidates = state.available_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    match s.decide(state, &candidates, catalog, DecideOptions::default(), &mut rng).unwrap() {
        Decision::Acquire(j) => Some(j),
        Decision::Stop => None,
    }
}

#[test]
fn fact_agrees_with_exhaustive_on_most_states() {
    let ds = three_feature_task(1500, 21);
    let rows = ds.splits.train.clone();
    let pcfg = PredictorConfig { epochs: 30, ..Default::default() };
    let (predictor, _) = Predictor::train(&ds, &rows, &pcfg, 21).unwrap();
    let fact_cfg = StrategyConfig::Fact(FactConfig { epochs: 30, dae_epochs: 30, ..Default::default() });
    let (fact, _) = train_strategy(&fact_cfg, &ds, &rows, &predictor, 21).unwrap();
    let (exhaustive, _) =
        train_strategy(&StrategyConfig::default_for("exhaustive").unwrap(), &ds, &rows, &predictor, 21).unwrap();

    let catalog = &ds.catalog;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (mut agree, mut total) = (0, 0);
    for _ in 0..200 {
        let r = ds.splits.test[rng.random_range(0..ds.splits.test.len())];
        // States with at least two candidates, so the choice is not forced.
        let known: Vec<bool> = match rng.random_range(0..4) {
            0 => vec![false; 3],
            k => (0..3).map(|j| j == k - 1).collect(),
        };
        let values = ds.row(r).iter().enumerate().map(|(c, &v)| if known[c] { v } else { 0.0 }).collect();
        let state = AcquisitionState::from_masks(catalog, values, vec![false; 3], known).unwrap();
        total += 1;
        agree += usize::from(first_choice(&fact, &state, catalog) == first_choice(&exhaustive, &state, catalog));
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.7, "agreement {rate}");
}

#[test]
fn static_order_starts_with_exhaustive_choice() {
    let ds = three_feature_task(600, 8);
    let rows = ds.splits.train.clone();
    let pcfg = PredictorConfig { epochs: 10, ..Default::default() };
    let (predictor, _) = Predictor::train(&ds, &rows, &pcfg, 8).unwrap();
    let (stat, _) =
        train_strategy(&StrategyConfig::StaticOrder { order: None }, &ds, &rows, &predictor, 8).unwrap();
    let (exhaustive, _) =
        train_strategy(&StrategyConfig::default_for("exhaustive").unwrap(), &ds, &rows, &predictor, 8).unwrap();
    let empty = AcquisitionState::new(&ds.catalog);
    assert_eq!(first_choice(&stat, &empty, &ds.catalog), first_choice(&exhaustive, &empty, &ds.catalog));
}

/// Optimal values of the 3-binary-feature toy (label = feature 0, unit
/// costs) by backward induction over knowledge states. Action 3 predicts.
fn toy_optimal(lambda: f64) -> BTreeMap<[Option<u8>; 3], Vec<usize>> {
    fn value(s: [Option<u8>; 3], lambda: f64, memo: &mut BTreeMap<[Option<u8>; 3], (f64, Vec<usize>)>) -> f64 {
        if let Some((v, _)) = memo.get(&s) {
            return *v;
        }
        // Without feature 0 the label is a fair coin.
        let predict = if s[0].is_some() { 0.0 } else { -0.5 * lambda };
        let mut q = vec![(3usize, predict)];
        for j in 0..3 {
            if s[j].is_none() {
                let mut total = -1.0;
                for bit in 0..2 {
                    let mut next = s;
                    next[j] = Some(bit);
                    total += 0.5 * value(next, lambda, memo);
                }
                q.push((j, total));
            }
        }
        let best = q.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let argmax = q.iter().filter(|p| (p.1 - best).abs() < 1e-12).map(|p| p.0).collect();
        memo.insert(s, (best, argmax));
        best
    }
    let mut memo = BTreeMap::new();
    value([None; 3], lambda, &mut memo);
    memo.into_iter().map(|(k, (_, a))| (k, a)).collect()
}

#[test]
fn zero_lambda_optimal_policy_predicts_immediately() {
    for (state, actions) in toy_optimal(0.0) {
        assert_eq!(actions, vec![3], "{state:?}");
    }
    let opt = toy_optimal(5.0);
    assert_eq!(opt[&[None; 3]], vec![0]);
    assert_eq!(opt[&[Some(1), None, None]], vec![3]);
}
