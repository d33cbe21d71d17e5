use std::sync::OnceLock;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use costsense::acquisition::{replay_costs, Cost, FeatureCatalog, TerminationRule};
use costsense::data::{label_diabetes, label_hypertension, TaskDataset};
use costsense::nn::{Activation, DenseNet, Mode};
use costsense::strategies::{
    certainty_reward, rank_candidates, run_episode, to_records, train_strategy, EpisodeOptions, Predictor,
    PredictorConfig, Strategy, StrategyConfig,
};
use costsense::xpt::parse_document;

fn random_setup() -> &'static (TaskDataset, Strategy) {
    static SETUP: OnceLock<(TaskDataset, Strategy)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((120, 5), |_| rng.random_range(-1.0..1.0));
        let labels = (0..120).map(|i| usize::from(x[[i, 0]] > 0.0)).collect();
        let catalog = FeatureCatalog::real_features(&[1, 2, 3, 5, 8].map(Cost::from_units)).unwrap();
        let ds = TaskDataset::from_dense("props", catalog, x, labels, 2, 17).unwrap();
        let cfg = PredictorConfig { epochs: 2, ..Default::default() };
        let (predictor, _) = Predictor::train(&ds, &ds.splits.train, &cfg, 17).unwrap();
        let config = StrategyConfig::Random { seed: 0 };
        let (strategy, _) = train_strategy(&config, &ds, &ds.splits.train, &predictor, 17).unwrap();
        (ds, strategy)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_head_is_a_distribution(
        seed in any::<u64>(),
        width in 1usize..12,
        classes in 2usize..6,
        scale in 0.1f64..50.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DenseNet::mlp(width, &[7], 0.2, classes, Activation::Softmax, &mut rng).unwrap();
        let input: Vec<f64> = (0..width).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        for mode in [Mode::Eval, Mode::StochasticEval] {
            let p = net.forward(&input, mode, seed).unwrap();
            prop_assert_eq!(p.len(), classes);
            prop_assert!(p.iter().all(|&v| v >= 0.0 && v.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ranking_ignores_a_common_cost_scale(
        costs in prop::collection::vec(1u64..100, 1..8),
        utils in prop::collection::vec(0.0f64..1.0, 8),
        alpha in 1u64..50,
    ) {
        let d = costs.len();
        let base = FeatureCatalog::real_features(&costs.iter().map(|&c| Cost::from_units(c)).collect::<Vec<_>>()).unwrap();
        let scaled = FeatureCatalog::real_features(&costs.iter().map(|&c| Cost::from_units(c * alpha)).collect::<Vec<_>>()).unwrap();
        let candidates: Vec<usize> = (0..d).collect();
        let ranked = rank_candidates(&candidates, &utils[..d], &base);
        prop_assert_eq!(&ranked, &rank_candidates(&candidates, &utils[..d], &scaled));
        let mut sorted = ranked.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, candidates);
    }

    #[test]
    fn random_episodes_respect_the_budget(budget in 0u64..20, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (ds, strategy) = random_setup();
        let row = ds.splits.test[pick.index(ds.splits.test.len())];
        let b = Cost::from_units(budget);
        let opts = EpisodeOptions::new(TerminationRule::Budget(b), seed);
        let ep = run_episode(strategy, ds, row, &opts).unwrap();
        let mut seen = ep.order.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), ep.order.len());
        prop_assert!(ep.total_cost <= b);
        let summed: u64 = ep.order.iter().map(|&j| ds.catalog.cost(j).micros()).sum();
        prop_assert_eq!(ep.total_cost.micros(), summed);
        let replayed = replay_costs(&to_records(0, &ep)).unwrap();
        prop_assert_eq!(replayed.get(&0).copied().unwrap_or(Cost::ZERO), ep.total_cost);
    }

    #[test]
    fn labels_are_total_and_monotone(a in 1e-3f64..400.0, b in 1e-3f64..400.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (dl, dh) = (label_diabetes(lo).unwrap(), label_diabetes(hi).unwrap());
        prop_assert!(dl <= dh && dh <= 2);
        prop_assert_eq!(dl == 0, lo < 100.0);
        prop_assert_eq!(dl == 2, lo > 125.0);
        let (hl, hh) = (label_hypertension(lo).unwrap(), label_hypertension(hi).unwrap());
        prop_assert!(hl <= hh);
        prop_assert_eq!(hl == 1, lo > 140.0);
    }

    #[test]
    fn non_positive_measurements_are_rejected(v in -400.0f64..=0.0) {
        prop_assert!(label_diabetes(v).is_err());
        prop_assert!(label_hypertension(v).is_err());
    }

    #[test]
    fn certainty_reward_is_non_negative(before in 0.0f64..=1.0, after in 0.0f64..=1.0, cost in 1e-6f64..100.0) {
        let r = certainty_reward(before, after, cost);
        prop_assert!(r >= 0.0 && r.is_finite());
    }

    #[test]
    fn parser_never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        let _ = parse_document(&bytes);
    }

    #[test]
    fn parser_never_panics_on_truncated_or_corrupted_files(cut in any::<prop::sample::Index>(), flip in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let golden = std::fs::read(format!("{}/fixtures/golden.xpt", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let _ = parse_document(&golden[..cut.index(golden.len() + 1)]);
        let mut corrupted = golden.clone();
        corrupted[flip.index(golden.len())] = byte;
        let _ = parse_document(&corrupted);
    }
}
