//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL/SKIP line.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use costsense::acquisition::{replay_costs, AcquisitionState, Cost, FeatureCatalog, TerminationRule, TrajectoryRecord};
use costsense::costs::{read_survey_csv, CostTable, REFERENCE_SURVEY_CSV};
use costsense::data::synthetic::{binary_toy_task, cost_sensitive_task, informative_task, TASKS};
use costsense::data::{build_task, PrepConfig, TaskDataset, TaskDefinition, VariableTable};
use costsense::eval::{sweep, Control, SweepTemplate};
use costsense::nn::{Activation, DenseNet, Layer, Mode, OutputGrad};
use costsense::strategies::{
    run_episode, train_strategy, Decision, DecideOptions, EpisodeOptions, FactConfig, Predictor, PredictorConfig,
    QConfig, Strategy, StrategyConfig,
};
use costsense::xpt::{ibm_to_ieee, parse_document, to_variable_tables, IbmValue, XptValue};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// A1

fn random_net(rng: &mut ChaCha8Rng) -> DenseNet {
    let depth = rng.random_range(1..=3);
    let mut width = rng.random_range(1..=32);
    let input = width;
    let mut layers = Vec::new();
    for i in 0..depth {
        let last = i + 1 == depth;
        let out = rng.random_range(1..=32);
        let activation = if last {
            [Activation::Softmax, Activation::Sigmoid, Activation::Identity][rng.random_range(0..3)]
        } else {
            [Activation::Relu, Activation::Sigmoid, Activation::Identity][rng.random_range(0..3)]
        };
        let scale = 1.0 / (width as f64).sqrt();
        layers.push(Layer {
            weight: Array2::from_shape_fn((out, width), |_| rng.random_range(-scale..scale)),
            bias: Array1::from_shape_fn(out, |_| rng.random_range(-0.1..0.1)),
            activation,
            dropout: 0.0,
        });
        width = out;
    }
    let net = DenseNet::new(layers).unwrap();
    assert_eq!(net.input_width(), input);
    net
}

fn close(a: f64, n: f64) -> bool {
    let diff = (a - n).abs();
    diff <= 1e-4 * a.abs().max(n.abs()) || diff <= 1e-8
}

fn a1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-4;
    let mut checked = 0usize;
    for net_id in 0..25 {
        let net = random_net(&mut rng);
        let x = Array2::from_shape_fn((3, net.input_width()), |_| rng.random_range(-1.0..1.0));
        let g = Array2::from_shape_fn((3, net.output_width()), |_| rng.random_range(-1.0..1.0));
        let objective = |n: &DenseNet, x: &Array2<f64>| (n.predict(x.view()).unwrap() * &g).sum();
        let cache = net.forward_batch(x.view(), Mode::Eval, &mut rng).unwrap();
        let grads = net.backward(&cache, OutputGrad::Output(g.clone())).unwrap();
        for l in 0..net.layers().len() {
            let (rows, cols) = net.layers()[l].weight.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let mut p = net.clone();
                    p.layers_mut()[l].weight[[r, c]] += h;
                    let mut m = net.clone();
                    m.layers_mut()[l].weight[[r, c]] -= h;
                    let numeric = (objective(&p, &x) - objective(&m, &x)) / (2.0 * h);
                    let analytic = grads.layers[l].0[[r, c]];
                    if !close(analytic, numeric) {
                        return Err(format!("net {net_id} layer {l} w[{r},{c}]: {analytic} vs {numeric}"));
                    }
                    checked += 1;
                }
                let mut p = net.clone();
                p.layers_mut()[l].bias[r] += h;
                let mut m = net.clone();
                m.layers_mut()[l].bias[r] -= h;
                let numeric = (objective(&p, &x) - objective(&m, &x)) / (2.0 * h);
                if !close(grads.layers[l].1[r], numeric) {
                    return Err(format!("net {net_id} layer {l} b[{r}]"));
                }
                checked += 1;
            }
        }
        for i in 0..x.nrows() {
            for c in 0..x.ncols() {
                let mut xp = x.clone();
                xp[[i, c]] += h;
                let mut xm = x.clone();
                xm[[i, c]] -= h;
                let numeric = (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * h);
                if !close(grads.input[[i, c]], numeric) {
                    return Err(format!("net {net_id} input[{i},{c}]"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} gradients checked on 25 nets"))
}

// A2

fn a2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut log = Vec::new();
    let mut expected: BTreeMap<u64, BigUint> = BTreeMap::new();
    let mut totals = BTreeMap::new();
    for episode in 0..1000u64 {
        let d = rng.random_range(1..=12);
        let costs: Vec<Cost> = (0..d).map(|_| Cost::from_micros(rng.random_range(0..=50_000_000_000))).collect();
        let catalog = FeatureCatalog::real_features(&costs).map_err(|e| e.to_string())?;
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let free: Vec<bool> = (0..d).map(|_| rng.random::<f64>() < 0.2).collect();
        let mut state = AcquisitionState::start(&catalog, &free, &row).map_err(|e| e.to_string())?;
        let mut oracle = BigUint::from(0u8);
        let mut order: Vec<usize> = state.available_actions();
        order.retain(|_| rng.random::<bool>());
        for (step, &j) in order.iter().enumerate() {
            state = state.query(j, &row[j..j + 1], &catalog).map_err(|e| e.to_string())?;
            oracle += BigUint::from(costs[j].micros());
            log.push(TrajectoryRecord {
                episode_id: episode,
                step,
                feature_index: j,
                cost: costs[j],
                spent_after: state.spent(),
            });
        }
        totals.insert(episode, state.total_cost(&catalog).map_err(|e| e.to_string())?);
        expected.insert(episode, oracle);
    }
    let replayed = replay_costs(&log).map_err(|e| e.to_string())?;
    let mut mismatches = 0;
    for (episode, total) in &totals {
        let replay = replayed.get(episode).copied().unwrap_or(Cost::ZERO);
        if *total != replay || BigUint::from(total.micros()) != expected[episode] {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over 1000 trajectories"))
}

// A3

/// Optimal action per partial assignment of the three-bit toy: index 3 is
/// Predict. The label equals bit 0 and bits are fair and independent.
fn toy_value_iteration(lambda: f64) -> BTreeMap<[Option<u8>; 3], (usize, f64)> {
    fn value(s: [Option<u8>; 3], lambda: f64, memo: &mut BTreeMap<[Option<u8>; 3], (usize, f64)>) -> f64 {
        if let Some(&(_, v)) = memo.get(&s) {
            return v;
        }
        let error = if s[0].is_some() { 0.0 } else { 0.5 };
        let mut best = (3usize, -lambda * error);
        for j in 0..3 {
            if s[j].is_none() {
                let mut q = -1.0;
                for b in 0..2u8 {
                    let mut next = s;
                    next[j] = Some(b);
                    q += 0.5 * value(next, lambda, memo);
                }
                if q > best.1 || (q == best.1 && j < best.0) {
                    best = (j, q);
                }
            }
        }
        memo.insert(s, best);
        best.1
    }
    let mut memo = BTreeMap::new();
    for code in 0..27u32 {
        let s = [0, 1, 2].map(|k| match (code / 3u32.pow(k)) % 3 {
            0 => None,
            1 => Some(0),
            _ => Some(1),
        });
        value(s, lambda, &mut memo);
    }
    memo
}

fn a3() -> Outcome {
    let lambda = 5.0;
    let oracle = toy_value_iteration(lambda);
    let mut worst = 1.0f64;
    for seed in [1u64, 2, 3] {
        let ds = binary_toy_task(2000, seed).map_err(|e| e.to_string())?;
        let train = ds.splits.train.clone();
        let pcfg = PredictorConfig { epochs: 30, ..Default::default() };
        let (predictor, _) = Predictor::train(&ds, &train, &pcfg, seed).map_err(|e| e.to_string())?;
        let config = StrategyConfig::RlBased { lambdas: vec![lambda], q: QConfig { episodes: 4000, epsilon_decay_fraction: 0.5, ..Default::default() } };
        let (strategy, _) = train_strategy(&config, &ds, &train, &predictor, seed).map_err(|e| e.to_string())?;
        let mut agree = 0;
        for (s, &(best, _)) in &oracle {
            let values: Vec<f64> = s.iter().map(|v| v.map_or(0.0, f64::from)).collect();
            let acquired: Vec<bool> = s.iter().map(Option::is_some).collect();
            let state = AcquisitionState::from_masks(&ds.catalog, values, vec![false; 3], acquired)
                .map_err(|e| e.to_string())?;
            let candidates = state.available_actions();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let decision = strategy
                .decide(&state, &candidates, &ds.catalog, DecideOptions::default(), &mut rng)
                .map_err(|e| e.to_string())?;
            let action = match decision {
                Decision::Acquire(j) => j,
                Decision::Stop => 3,
            };
            agree += usize::from(action == best);
        }
        worst = worst.min(agree as f64 / oracle.len() as f64);
    }
    check(worst >= 0.95, format!("worst-seed agreement {:.1}% over 27 states", 100.0 * worst))
}

// A4, A5

struct Trained {
    ds: TaskDataset,
    predictor: Predictor,
}

fn prepare(ds: TaskDataset, seed: u64) -> Result<Trained, String> {
    let (predictor, _) = Predictor::train(&ds, &ds.splits.train, &PredictorConfig::default(), seed)
        .map_err(|e| e.to_string())?;
    Ok(Trained { ds, predictor })
}

fn fit(t: &Trained, config: &StrategyConfig, seed: u64) -> Result<Strategy, String> {
    train_strategy(config, &t.ds, &t.ds.splits.train, &t.predictor, seed)
        .map(|(s, _)| s)
        .map_err(|e| e.to_string())
}

fn ol_config(episodes: usize) -> StrategyConfig {
    let StrategyConfig::Ol { mc_samples, delta, q } = StrategyConfig::default_for("ol").unwrap() else { unreachable!() };
    StrategyConfig::Ol { mc_samples, delta, q: QConfig { episodes, ..q } }
}

/// First acquisitions under a one-unit budget, plus accuracy.
fn first_choices(strategy: &Strategy, t: &Trained, rows: &[usize]) -> Result<(Vec<Option<usize>>, f64), String> {
    let mut opts = EpisodeOptions::new(TerminationRule::Budget(Cost::from_units(1)), 7);
    opts.allow_early_stop = false;
    let mut firsts = Vec::new();
    let mut correct = 0;
    for &r in rows {
        let e = run_episode(strategy, &t.ds, r, &opts).map_err(|e| e.to_string())?;
        firsts.push(e.order.first().copied());
        correct += usize::from(e.correct);
    }
    Ok((firsts, correct as f64 / rows.len() as f64))
}

fn a4() -> Outcome {
    let t = prepare(informative_task(1600, 11).map_err(|e| e.to_string())?, 11)?;
    let rows: Vec<usize> = t.ds.splits.test.iter().copied().take(200).collect();
    let mut report = Vec::new();
    let mut ok = rows.len() == 200;
    for (name, config) in [
        ("ol", ol_config(2000)),
        ("fact", StrategyConfig::Fact(FactConfig::default())),
        ("exhaustive", StrategyConfig::default_for("exhaustive").unwrap()),
    ] {
        let s = fit(&t, &config, 11)?;
        let (firsts, _) = first_choices(&s, &t, &rows)?;
        let rate = firsts.iter().filter(|f| **f == Some(0)).count() as f64 / rows.len() as f64;
        ok &= rate >= 0.9;
        report.push(format!("{name} {:.1}%", 100.0 * rate));
    }
    check(ok, format!("feature 0 first: {}", report.join(", ")))
}

fn a5() -> Outcome {
    let t = prepare(cost_sensitive_task(1600, 12).map_err(|e| e.to_string())?, 12)?;
    let rows: Vec<usize> = t.ds.splits.test.clone();
    let random = fit(&t, &StrategyConfig::Random { seed: 12 }, 12)?;
    let (_, random_acc) = first_choices(&random, &t, &rows)?;
    let mut report = vec![format!("random acc {:.1}%", 100.0 * random_acc)];
    let mut ok = true;
    for (name, config) in [("ol", ol_config(2000)), ("fact", StrategyConfig::Fact(FactConfig::default()))] {
        let s = fit(&t, &config, 12)?;
        let (firsts, acc) = first_choices(&s, &t, &rows)?;
        let rate = firsts.iter().filter(|f| **f == Some(1)).count() as f64 / rows.len() as f64;
        ok &= rate >= 0.8 && acc >= 0.85 && acc >= random_acc + 0.05;
        report.push(format!("{name} B-first {:.1}% acc {:.1}%", 100.0 * rate, 100.0 * acc));
    }
    check(ok, report.join(", "))
}

// A6

fn light_configs() -> Vec<StrategyConfig> {
    let q = QConfig { episodes: 200, warmup: 64, ..Default::default() };
    vec![
        StrategyConfig::default_for("exhaustive").unwrap(),
        StrategyConfig::Fact(FactConfig { dae_epochs: 5, epochs: 10, ..Default::default() }),
        StrategyConfig::RlBased { lambdas: vec![1.0, 10.0], q: q.clone() },
        StrategyConfig::Ol { mc_samples: 10, delta: 0.0, q },
        StrategyConfig::Random { seed: 3 },
        StrategyConfig::StaticOrder { order: None },
    ]
}

fn a6() -> Outcome {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (i, task) in TASKS.iter().enumerate() {
        let ds = costsense::data::synthetic::by_name(task, 600, 20 + i as u64).unwrap().map_err(|e| e.to_string())?;
        let cfg = PredictorConfig { epochs: 15, ..Default::default() };
        let (predictor, _) = Predictor::train(&ds, &ds.splits.train, &cfg, 3).map_err(|e| e.to_string())?;
        let t = Trained { ds, predictor };
        let test = t.ds.splits.test.clone();
        for config in light_configs() {
            let s = fit(&t, &config, 5)?;
            let out = sweep(&s, &t.ds, &test, &[Control::Unlimited], &SweepTemplate::default(), 9)
                .map_err(|e| e.to_string())?;
            let direct = s.full_accuracy(&t.ds, &test).map_err(|e| e.to_string())?;
            let gap = (out.result.points[0].accuracy - direct).abs();
            if gap > 0.005 {
                return Err(format!("{task}/{}: sweep {} vs direct {direct}", s.name(), out.result.points[0].accuracy));
            }
            worst = worst.max(gap);
            runs += 1;
        }
    }
    Ok(format!("{runs} strategy/task pairs, largest gap {:.2} points", 100.0 * worst))
}

// A7

fn a7() -> Outcome {
    let responses = read_survey_csv(REFERENCE_SURVEY_CSV.as_bytes()).map_err(|e| e.to_string())?;
    let table = CostTable::from_survey(&responses).map_err(|e| e.to_string())?;
    let costs = table.in_question_order();
    check(costs == vec![2, 4, 5, 9], format!("cost table {costs:?}"))
}

// A8

fn a8(dir: &Path) -> Outcome {
    let mut tables: Vec<VariableTable> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xpt")) {
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            let doc = parse_document(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            match to_variable_tables(&doc, "SEQN", None) {
                Ok(import) => tables.extend(import.tables),
                Err(e) => eprintln!("skipping {}: {e}", path.display()),
            }
        }
    }
    let costs = CostTable::reference();
    let config = PrepConfig::default();
    let mut report = Vec::new();
    let mut ok = true;
    for (task, target) in
        [(TaskDefinition::diabetes(), 84.2), (TaskDefinition::heart_disease(), 79.7), (TaskDefinition::hypertension(), 81.9)]
    {
        let ds = build_task(&tables, &task, &config, &costs).map_err(|e| format!("{}: {e}", task.name))?;
        let (p, _) = Predictor::train(&ds, &ds.splits.train, &PredictorConfig::default(), 0).map_err(|e| e.to_string())?;
        let acc = 100.0 * p.full_accuracy(&ds, &ds.splits.test).map_err(|e| e.to_string())?;
        ok &= (acc - target).abs() <= 2.0;
        report.push(format!("{} {acc:.1}% (target {target})", task.name));
        if task.name == "diabetes" {
            let glucose = tables
                .iter()
                .find(|t| t.variable_id == "LBXGLU")
                .ok_or("LBXGLU table missing")?
                .lookup()
                .into_iter()
                .filter_map(|(id, v)| v.as_real().map(|g| (id, g)))
                .collect::<BTreeMap<i64, f64>>();
            let mut audited = 0;
            let mut wrong = 0;
            for (i, id) in ds.subject_ids.iter().enumerate().take(1000) {
                let g = glucose[id];
                let expected = if g < 100.0 { 0 } else if g <= 125.0 { 1 } else { 2 };
                wrong += usize::from(ds.labels[i] != expected);
                audited += 1;
            }
            ok &= wrong == 0;
            report.push(format!("label audit {wrong}/{audited} wrong"));
        }
    }
    check(ok, report.join(", "))
}

// A9

/// Exact decimal expansion of the IBM value, parsed with correct rounding.
fn ibm_reference(bytes: [u8; 8]) -> f64 {
    let negative = bytes[0] & 0x80 != 0;
    let exponent = i64::from(bytes[0] & 0x7f);
    let fraction = BigUint::from_bytes_be(&bytes[1..]);
    // value = fraction × 2^(4·(exponent − 64) − 56)
    let k = 4 * (exponent - 64) - 56;
    let text = if k >= 0 {
        (fraction << (k as usize)).to_string()
    } else {
        let digits = (fraction * BigUint::from(5u8).pow((-k) as u32)).to_string();
        let places = (-k) as usize;
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (int, frac) = padded.split_at(padded.len() - places);
        format!("{int}.{frac}")
    };
    let v: f64 = text.parse().unwrap();
    if negative {
        -v
    } else {
        v
    }
}

fn a9() -> Outcome {
    let golden = include_bytes!("../fixtures/golden.xpt");
    let doc = parse_document(golden).map_err(|e| e.to_string())?;
    let m = doc.members.first().ok_or("no members")?;
    let names: Vec<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
    let expected = vec![
        vec![XptValue::Number(41475.0), XptValue::Number(95.0)],
        vec![XptValue::Number(41476.0), XptValue::Missing('.')],
        vec![XptValue::Number(41477.0), XptValue::Number(126.5)],
    ];
    if m.name != "GLU" || names != ["SEQN", "LBXGLU"] || m.rows != expected {
        return Err(format!("golden document mismatch: {} {names:?}", m.name));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..10_000 {
        let bytes: [u8; 8] = rng.random();
        match ibm_to_ieee(bytes) {
            IbmValue::Number(v) => {
                compared += 1;
                if v.to_bits() != ibm_reference(bytes).to_bits() && !(v == 0.0 && ibm_reference(bytes) == 0.0) {
                    mismatches += 1;
                }
            }
            IbmValue::Missing(_) => {}
        }
    }
    check(mismatches == 0 && compared > 9_900, format!("{mismatches} mismatches over {compared} patterns"))
}

// A10

fn a10() -> Outcome {
    let t = prepare(cost_sensitive_task(800, 10).map_err(|e| e.to_string())?, 10)?;
    let fact = fit(&t, &StrategyConfig::Fact(FactConfig { dae_epochs: 10, epochs: 15, ..Default::default() }), 10)?;
    let exhaustive = fit(&t, &StrategyConfig::default_for("exhaustive").unwrap(), 10)?;
    let catalog = &t.ds.catalog;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut compared = 0;
    for _ in 0..100 {
        let r = rng.random_range(0..t.ds.len());
        let mut acquired: Vec<bool> = (0..catalog.len()).map(|_| rng.random::<f64>() < 0.4).collect();
        acquired[rng.random_range(0..catalog.len())] = false;
        let values: Vec<f64> =
            t.ds.row(r).iter().enumerate().map(|(c, &v)| if acquired[catalog.feature_of_column(c)] { v } else { 0.0 }).collect();
        let state = AcquisitionState::from_masks(catalog, values, vec![false; catalog.len()], acquired)
            .map_err(|e| e.to_string())?;
        let candidates = state.available_actions();
        for s in [&fact, &exhaustive] {
            let mut dummy = ChaCha8Rng::seed_from_u64(0);
            let base = s.decide(&state, &candidates, catalog, DecideOptions::default(), &mut dummy).map_err(|e| e.to_string())?;
            for alpha in [0.5, 2.0, 10.0] {
                let scaled = catalog.map_costs(|_, m| Cost::from_micros((m.cost.micros() as f64 * alpha) as u64));
                let d = s.decide(&state, &candidates, &scaled, DecideOptions::default(), &mut dummy).map_err(|e| e.to_string())?;
                if d != base {
                    return Err(format!("{} changed choice under α = {alpha}", s.name()));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} scaled selections unchanged"))
}

// A11

const A11_CONFIG: &str = r#"
task = "cost-sensitive"
synthetic_rows = 500
seed = 11

[predictor]
epochs = 8

[[strategies]]
kind = "exhaustive"

[[strategies]]
kind = "fact"
epochs = 8
dae_epochs = 8

[[strategies]]
kind = "rl"
lambdas = [1.0, 10.0]
[strategies.q]
episodes = 150
warmup = 64

[[strategies]]
kind = "ol"
mc_samples = 4
[strategies.q]
episodes = 150
warmup = 64

[[strategies]]
kind = "random"

[[strategies]]
kind = "static-order"

[sweep]
budgets = [1, 3, 10]
order_samples = 40
mc_samples = 4
"#;

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("under root").to_string_lossy().into_owned();
            out.insert(rel, std::fs::read(&p)?);
        }
    }
    Ok(())
}

fn pipeline_run(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let config = root.join("run.toml");
    std::fs::write(&config, A11_CONFIG).map_err(|e| e.to_string())?;
    let results = root.join("results");
    for cmd in ["prepare", "train", "sweep"] {
        let args = ["costsense", "--config", config.to_str().unwrap(), "--output", results.to_str().unwrap(), cmd];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = costsense::cli::run(args, &mut std::io::empty(), &mut out, &mut err);
        if code != 0 {
            return Err(format!("{cmd} exited {code}: {}", String::from_utf8_lossy(&err)));
        }
    }
    let mut files = BTreeMap::new();
    collect_files(&results, &results, &mut files).map_err(|e| e.to_string())?;
    Ok(files)
}

fn a11() -> Outcome {
    let (t1, t2) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = pipeline_run(t1.path())?;
    let second = pipeline_run(t2.path())?;
    if first.keys().ne(second.keys()) {
        return Err("runs wrote different file sets".into());
    }
    let differing: Vec<&String> = first.iter().filter(|(k, v)| second[*k] != **v).map(|(k, _)| k).collect();
    if !differing.is_empty() {
        return Err(format!("{} files differ, e.g. {}", differing.len(), differing[0]));
    }
    let root = t1.path().to_string_lossy().into_owned();
    let leaking = first
        .iter()
        .filter(|(k, v)| k.ends_with(".json") && String::from_utf8_lossy(v).contains(&root))
        .count();
    let expected = ["cost-sensitive/bundle/data.csv", "cost-sensitive/checkpoints/ol.json", "cost-sensitive/fact/sweep.csv"];
    check(
        leaking == 0 && expected.iter().all(|f| first.contains_key(*f)),
        format!("{} files byte-identical across two runs; {leaking} manifests with absolute paths", first.len()),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let nhanes = std::env::var_os("COSTSENSE_NHANES_DIR");
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Option<Outcome>>)> = vec![
        ("A1", "gradient correctness", Box::new(|| Some(a1()))),
        ("A2", "cost accounting oracle", Box::new(|| Some(a2()))),
        ("A3", "tabular RL oracle", Box::new(|| Some(a3()))),
        ("A4", "informative-feature synthetic", Box::new(|| Some(a4()))),
        ("A5", "cost-sensitivity synthetic", Box::new(|| Some(a5()))),
        ("A6", "full-budget consistency", Box::new(|| Some(a6()))),
        ("A7", "cost-assignment reproduction", Box::new(|| Some(a7()))),
        ("A8", "NHANES task accuracies", Box::new(move || nhanes.as_ref().map(|d| a8(Path::new(d))))),
        ("A9", "XPT conformance", Box::new(|| Some(a9()))),
        ("A10", "per-cost ranking invariance", Box::new(|| Some(a10()))),
        ("A11", "pipeline determinism", Box::new(|| Some(a11()))),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            None => println!("{id} SKIP {title}: set COSTSENSE_NHANES_DIR to a directory of NHANES .XPT files"),
            Some(Ok(detail)) => println!("{id} PASS {title} ({secs:.1}s): {detail}"),
            Some(Err(detail)) => {
                println!("{id} FAIL {title} ({secs:.1}s): {detail}");
                failed.push(*id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
