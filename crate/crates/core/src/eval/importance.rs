use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_f64, EvalError};
use crate::data::TaskDataset;
use crate::nn::{train_epoch, Activation, AdamConfig, AdamState, DenseNet, Loss, NnError, Targets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig { l2: 1e-3, epochs: 100, learning_rate: 0.01, batch_size: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: usize,
    pub name: String,
    /// Mean absolute weight over the feature's columns and all classes,
    /// relative to the largest such mean.
    pub importance: f64,
}

/// Fits an L2-regularized multinomial logistic model on fully observed
/// `rows` and ranks features by normalized weight magnitude, largest first.
pub fn logistic_importance(
    ds: &TaskDataset,
    rows: &[usize],
    cfg: &ImportanceConfig,
) -> Result<Vec<FeatureImportance>, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::InvalidInput("no rows for importance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x, _, labels) = ds.subset(rows);
    let mut net = DenseNet::mlp(x.ncols(), &[], 0.0, ds.num_classes, Activation::Softmax, &mut rng)
        .map_err(|e| EvalError::InvalidInput(e.to_string()))?;
    let adam = AdamConfig {
        batch_size: cfg.batch_size,
        weight_decay: cfg.l2,
        ..AdamConfig::default().with_learning_rate(cfg.learning_rate)
    };
    let mut state = AdamState::new(&net);
    for _ in 0..cfg.epochs {
        train_epoch(&mut net, x.view(), Targets::Classes(&labels), None, Loss::CrossEntropy, &adam, &mut state, &mut rng)
            .map_err(|e| match e {
                NnError::NonFiniteLoss(v) => EvalError::TrainingDiverged(format!("loss {v}")),
                other => EvalError::InvalidInput(other.to_string()),
            })?;
    }
    let w = &net.layers()[0].weight;
    let catalog = &ds.catalog;
    let raw: Vec<f64> = (0..catalog.len())
        .map(|j| {
            let cols = catalog.columns(j);
            let n = (cols.len() * w.nrows()) as f64;
            cols.flat_map(|c| w.column(c).to_vec()).map(f64::abs).sum::<f64>() / n
        })
        .collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::TrainingDiverged("non-finite weights".into()));
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    let mut out: Vec<FeatureImportance> = raw
        .iter()
        .enumerate()
        .map(|(j, &v)| FeatureImportance {
            feature: j,
            name: catalog.entries()[j].name.clone(),
            importance: if max > 0.0 { v / max } else { 0.0 },
        })
        .collect();
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

pub fn importance_csv_string(ranked: &[FeatureImportance]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "feature", "name", "importance"]).expect("in-memory write");
    for (i, f) in ranked.iter().enumerate() {
        w.write_record([(i + 1).to_string(), f.feature.to_string(), f.name.clone(), fmt_f64(f.importance)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
