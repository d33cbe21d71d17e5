//! Seeded synthetic tasks with known optimal behavior, plus an NHANES-shaped
//! raw table generator for exercising the pipeline end to end.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{DataError, RawValue, TaskDataset, VariableTable};
use crate::acquisition::{Category, Cost, FeatureCatalog, FeatureKind, FeatureMeta};

fn real(name: &str, cost: u64) -> FeatureMeta {
    FeatureMeta::new(name, FeatureKind::Real, Category::Examination, Cost::from_units(cost))
}

/// Names of the built-in synthetic tasks.
pub const TASKS: [&str; 3] = ["informative", "cost-sensitive", "binary-toy"];

pub fn by_name(name: &str, n: usize, seed: u64) -> Option<Result<TaskDataset, DataError>> {
    match name {
        "informative" => Some(informative_task(n, seed)),
        "cost-sensitive" => Some(cost_sensitive_task(n, seed)),
        "binary-toy" => Some(binary_toy_task(n, seed)),
        _ => None,
    }
}

/// Eight standard normal features at cost 1; the label is `f0 > 0`.
pub fn informative_task(n: usize, seed: u64) -> Result<TaskDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 8;
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            x[[i, j]] = StandardNormal.sample(&mut rng);
        }
        y.push(usize::from(x[[i, 0]] > 0.0));
    }
    let metas = (0..d).map(|j| real(&format!("f{j}"), 1)).collect();
    TaskDataset::from_dense("informative", FeatureCatalog::new(metas)?, x, y, 2, seed)
}

/// Feature `A` (cost 9) reveals the label, `B` (cost 1) agrees with it 90%
/// of the time, six noise features cost 1 each.
pub fn cost_sensitive_task(n: usize, seed: u64) -> Result<TaskDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.1).expect("valid");
    let d = 8;
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = rng.random_range(0..2usize);
        let sign = |c: usize| if c == 1 { 1.0 } else { -1.0 };
        let proxy = if rng.random::<f64>() < 0.9 { label } else { 1 - label };
        x[[i, 0]] = sign(label) + jitter.sample(&mut rng);
        x[[i, 1]] = sign(proxy) + jitter.sample(&mut rng);
        for j in 2..d {
            x[[i, j]] = StandardNormal.sample(&mut rng);
        }
        y.push(label);
    }
    let mut metas = vec![real("A", 9), real("B", 1)];
    metas.extend((2..d).map(|j| real(&format!("noise{}", j - 1), 1)));
    TaskDataset::from_dense("cost-sensitive", FeatureCatalog::new(metas)?, x, y, 2, seed)
}

/// Three fair binary features at cost 1; the label equals the first.
pub fn binary_toy_task(n: usize, seed: u64) -> Result<TaskDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 3));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..3 {
            x[[i, j]] = f64::from(u8::from(rng.random::<bool>()));
        }
        y.push(x[[i, 0]] as usize);
    }
    let metas = (0..3)
        .map(|j| FeatureMeta::new(format!("b{j}"), FeatureKind::Binary, Category::Examination, Cost::from_units(1)))
        .collect();
    TaskDataset::from_dense("binary-toy", FeatureCatalog::new(metas)?, x, y, 2, seed)
}

/// Raw per-variable tables shaped like an NHANES cycle: demographics,
/// examination, laboratory and questionnaire variables with realistic gaps,
/// the three target variables, and pure noise.
pub fn nhanes_like_tables(n: usize, seed: u64) -> Vec<VariableTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<i64> = (0..n as i64).map(|i| 10_000 + i).collect();
    let mut cols: Vec<(&str, Category, Vec<RawValue>)> = [
        ("RIDAGEYR", Category::Demographics),
        ("RIAGENDR", Category::Demographics),
        ("DMDEDUC2", Category::Demographics),
        ("BMXBMI", Category::Examination),
        ("BMXWAIST", Category::Examination),
        ("BPXSY1", Category::Examination),
        ("BPXDI1", Category::Examination),
        ("LBXGLU", Category::Laboratory),
        ("LBXGH", Category::Laboratory),
        ("LBXTC", Category::Laboratory),
        ("LBXNOISE", Category::Laboratory),
        ("PAQ650", Category::Questionnaire),
        ("SMQ020", Category::Questionnaire),
        ("MCQ160B", Category::Questionnaire),
        ("MCQ160C", Category::Questionnaire),
        ("MCQ160D", Category::Questionnaire),
        ("MCQ160E", Category::Questionnaire),
    ]
    .into_iter()
    .map(|(id, c)| (id, c, Vec::with_capacity(n)))
    .collect();

    let z = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    for _ in 0..n {
        let age = rng.random_range(18.0..80.0f64).round();
        let male = rng.random::<bool>();
        let educ = rng.random_range(1..=5) as f64;
        let active = rng.random::<f64>() < 0.45 - (age - 18.0) / 250.0;
        let smoker = rng.random::<f64>() < 0.4;
        let bmi = (27.0 + 5.0 * z(&mut rng) - if active { 2.0 } else { 0.0 }).max(15.0);
        let waist = 2.4 * bmi + 30.0 + 6.0 * z(&mut rng);
        let sys = 95.0 + 0.55 * age + 0.6 * bmi + 10.0 * z(&mut rng);
        let dia = 0.5 * sys + 10.0 + 6.0 * z(&mut rng);
        let glu = (70.0 + 0.35 * age + 1.2 * (bmi - 20.0) + 15.0 * z(&mut rng)).max(50.0);
        let a1c = 3.0 + glu / 40.0 + 0.3 * z(&mut rng);
        let chol = 170.0 + 0.5 * age + 30.0 * z(&mut rng);
        let risk = -7.5 + 0.07 * age + 0.06 * (sys - 120.0) + if smoker { 0.8 } else { 0.0 } + 0.5 * f64::from(male);
        let heart = rng.random::<f64>() < 1.0 / (1.0 + (-risk).exp());

        let yn = |b: bool| RawValue::Real(if b { 1.0 } else { 2.0 });
        let lab_missing = rng.random::<f64>() < 0.15;
        let q_missing = rng.random::<f64>() < 0.1;
        let mut row = vec![
            RawValue::Real(age),
            RawValue::Real(if male { 1.0 } else { 2.0 }),
            if rng.random::<f64>() < 0.05 { RawValue::Missing } else { RawValue::Real(educ) },
            RawValue::Real((bmi * 10.0).round() / 10.0),
            if rng.random::<f64>() < 0.08 { RawValue::Missing } else { RawValue::Real((waist * 10.0).round() / 10.0) },
            RawValue::Real(sys.round().max(70.0)),
            RawValue::Real(dia.round().max(30.0)),
        ];
        if lab_missing {
            row.extend([RawValue::Missing, RawValue::Missing, RawValue::Missing, RawValue::Missing]);
        } else {
            row.extend([
                RawValue::Real(glu.round()),
                RawValue::Real((a1c * 10.0).round() / 10.0),
                RawValue::Real(chol.round()),
                RawValue::Real(rng.random_range(0.0..100.0f64).round()),
            ]);
        }
        row.push(yn(active));
        row.push(yn(smoker));
        for k in 0..4 {
            if q_missing {
                row.push(RawValue::Missing);
            } else {
                row.push(yn(heart && (k == 0 || rng.random::<f64>() < 0.5)));
            }
        }
        for (c, v) in cols.iter_mut().zip(row) {
            c.2.push(v);
        }
    }
    cols.into_iter()
        .map(|(id, cat, values)| VariableTable::new(id, cat, ids.clone(), values).expect("lengths match"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostTable;
    use crate::data::{build_task, PrepConfig, TaskDefinition};

    #[test]
    fn task_shapes() {
        let ds = informative_task(100, 1).unwrap();
        assert_eq!(ds.matrix.dim(), (100, 8));
        let ds = cost_sensitive_task(100, 1).unwrap();
        assert_eq!(ds.catalog.cost(0), Cost::from_units(9));
        let ds = binary_toy_task(64, 1).unwrap();
        assert!(ds.labels.iter().zip(ds.matrix.column(0)).all(|(&y, &x)| y as f64 == x));
    }

    #[test]
    fn proxy_accuracy_near_ninety_percent() {
        let ds = cost_sensitive_task(5000, 2).unwrap();
        let agree = (0..ds.len()).filter(|&i| usize::from(ds.matrix[[i, 1]] > 0.0) == ds.labels[i]).count();
        let rate = agree as f64 / ds.len() as f64;
        assert!((rate - 0.9).abs() < 0.02, "{rate}");
    }

    #[test]
    fn nhanes_like_builds_all_three_tasks() {
        let tables = nhanes_like_tables(1500, 3);
        for def in [TaskDefinition::diabetes(), TaskDefinition::hypertension(), TaskDefinition::heart_disease()] {
            let ds = build_task(&tables, &def, &PrepConfig::default(), &CostTable::reference()).unwrap();
            assert!(ds.num_features() >= 2, "{}", def.name);
            assert!(!ds.catalog.entries().iter().any(|e| def.target.variables().contains(&e.name)));
            ds.check_invariants().unwrap();
        }
    }
}
