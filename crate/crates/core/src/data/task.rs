use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::{label_diabetes, label_heart_disease, label_hypertension};
use super::preprocess::{one_hot, NormStats, Vocabulary};
use super::select::{auto_select, score_variable, SelectedVariable};
use super::{DataError, RawValue, VariableTable};
use crate::acquisition::{Category, Cost, FeatureCatalog, FeatureKind, FeatureMeta};
use crate::costs::CostTable;

/// How the label is computed from raw variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// Fasting glucose, three classes.
    Diabetes { variable: String },
    /// Systolic pressure, two classes.
    Hypertension { variable: String },
    /// History questions coded 1 = yes, 2 = no.
    HeartDisease { indicators: Vec<String> },
    /// A variable holding non-negative integer class ids.
    Column { variable: String },
}

impl TargetSpec {
    pub fn variables(&self) -> Vec<String> {
        match self {
            TargetSpec::Diabetes { variable }
            | TargetSpec::Hypertension { variable }
            | TargetSpec::Column { variable } => vec![variable.clone()],
            TargetSpec::HeartDisease { indicators } => indicators.clone(),
        }
    }

    /// Labels of every subject for which one is computable.
    pub fn compute(&self, tables: &[VariableTable]) -> Result<(BTreeMap<i64, usize>, usize), DataError> {
        let find = |id: &str| {
            tables
                .iter()
                .find(|t| t.variable_id == id)
                .ok_or_else(|| DataError::MissingVariable(id.to_string()))
        };
        let mut labels = BTreeMap::new();
        let mut invalid = 0usize;
        let num_classes = match self {
            TargetSpec::Diabetes { variable } | TargetSpec::Hypertension { variable } => {
                let f = if matches!(self, TargetSpec::Diabetes { .. }) {
                    label_diabetes
                } else {
                    label_hypertension
                };
                let t = find(variable)?;
                for (s, v) in t.subject_ids.iter().zip(&t.values) {
                    if let Some(x) = v.as_real() {
                        match f(x) {
                            Ok(y) => {
                                labels.insert(*s, y);
                            }
                            Err(DataError::InvalidMeasurement(_)) => invalid += 1,
                            Err(e) => return Err(e),
                        }
                    }
                }
                if matches!(self, TargetSpec::Diabetes { .. }) {
                    3
                } else {
                    2
                }
            }
            TargetSpec::HeartDisease { indicators } => {
                if indicators.is_empty() {
                    return Err(DataError::NoIndicatorsConfigured);
                }
                let lookups: Vec<BTreeMap<i64, &RawValue>> =
                    indicators.iter().map(|i| find(i).map(|t| t.lookup())).collect::<Result<_, _>>()?;
                let subjects: BTreeSet<i64> = lookups.iter().flat_map(|l| l.keys().copied()).collect();
                for s in subjects {
                    let flags: Vec<Option<bool>> = lookups
                        .iter()
                        .map(|l| match l.get(&s).and_then(|v| v.as_real()) {
                            Some(1.0) => Some(true),
                            Some(2.0) => Some(false),
                            _ => None,
                        })
                        .collect();
                    if let Some(y) = label_heart_disease(&flags)? {
                        labels.insert(s, y);
                    }
                }
                2
            }
            TargetSpec::Column { variable } => {
                let t = find(variable)?;
                let mut max = 0usize;
                for (s, v) in t.subject_ids.iter().zip(&t.values) {
                    match v.as_real() {
                        Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e6 => {
                            max = max.max(x as usize);
                            labels.insert(*s, x as usize);
                        }
                        Some(_) => invalid += 1,
                        None => {}
                    }
                }
                max + 1
            }
        };
        if invalid > 0 {
            warn!("{invalid} subjects with an invalid target measurement were dropped");
        }
        Ok((labels, num_classes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub name: String,
    pub target: TargetSpec,
    /// Explicit feature list; `None` runs automatic selection.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    /// Variables never used as features (besides the target's own).
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl TaskDefinition {
    pub fn diabetes() -> Self {
        Self::auto("diabetes", TargetSpec::Diabetes { variable: "LBXGLU".into() })
    }

    pub fn hypertension() -> Self {
        let mut t = Self::auto("hypertension", TargetSpec::Hypertension { variable: "BPXSY1".into() });
        // Other blood pressure readings restate the target.
        t.exclude = ["BPXSY2", "BPXSY3", "BPXSY4"].map(String::from).to_vec();
        t
    }

    pub fn heart_disease() -> Self {
        let indicators = ["MCQ160B", "MCQ160C", "MCQ160D", "MCQ160E"].map(String::from).to_vec();
        Self::auto("heart-disease", TargetSpec::HeartDisease { indicators })
    }

    pub fn auto(name: &str, target: TargetSpec) -> Self {
        TaskDefinition { name: name.into(), target, features: None, exclude: Vec::new() }
    }

    /// Built-in task by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "diabetes" => Some(Self::diabetes()),
            "hypertension" => Some(Self::hypertension()),
            "heart-disease" | "heart_disease" | "heart" => Some(Self::heart_disease()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub tau_mi: f64,
    pub tau_avail: f64,
    pub mi_bins: usize,
    pub max_categories: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            tau_mi: 0.02,
            tau_avail: 0.5,
            mi_bins: super::DEFAULT_MI_BINS,
            max_categories: 10,
            seed: 0,
            train_fraction: 0.7,
            validation_fraction: 0.15,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let ok = self.train_fraction > 0.0
            && self.validation_fraction >= 0.0
            && self.train_fraction + self.validation_fraction <= 1.0
            && self.mi_bins >= 2
            && self.max_categories >= 2;
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Row indices of each split, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "validation" | "val" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Per-class seeded shuffle, cut at the given fractions.
pub fn stratified_split(labels: &[usize], train: f64, validation: f64, seed: u64) -> Splits {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut splits = Splits::default();
    for (_, mut rows) in by_class {
        rows.shuffle(&mut rng);
        let n = rows.len() as f64;
        let n_train = ((n * train).round() as usize).min(rows.len());
        let n_val = ((n * validation).round() as usize).min(rows.len() - n_train);
        splits.train.extend_from_slice(&rows[..n_train]);
        splits.validation.extend_from_slice(&rows[n_train..n_train + n_val]);
        splits.test.extend_from_slice(&rows[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.validation.sort_unstable();
    splits.test.sort_unstable();
    splits
}

/// How one raw variable became encoded columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "kebab-case")]
pub enum FeatureRecipe {
    Standardize { variable: String, stats: NormStats },
    OneHot { variable: String, vocabulary: Vocabulary },
    /// Used as-is (synthetic data).
    Identity { variable: String },
}

impl FeatureRecipe {
    pub fn variable(&self) -> &str {
        match self {
            FeatureRecipe::Standardize { variable, .. }
            | FeatureRecipe::OneHot { variable, .. }
            | FeatureRecipe::Identity { variable } => variable,
        }
    }

    /// Encodes one raw measurement into `width` columns the way the training
    /// data was encoded. Identity features take `width` numbers separated by
    /// `;`.
    pub fn encode(&self, raw: &str, width: usize) -> Result<Vec<f64>, DataError> {
        let bad = || DataError::InvalidValue(format!("cannot encode {raw:?} for {}", self.variable()));
        match self {
            FeatureRecipe::Standardize { stats, .. } => {
                let v = RawValue::parse(raw).as_real().ok_or_else(bad)?;
                Ok(vec![stats.apply(v)])
            }
            FeatureRecipe::OneHot { vocabulary, .. } => {
                let code = RawValue::parse(raw).as_code().ok_or_else(bad)?;
                let i = vocabulary.index(&code).ok_or_else(bad)?;
                let mut out = vec![0.0; vocabulary.len()];
                out[i] = 1.0;
                Ok(out)
            }
            FeatureRecipe::Identity { .. } => {
                let out: Vec<f64> = raw
                    .split(';')
                    .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<_>>()
                    .ok_or_else(bad)?;
                if out.len() != width {
                    return Err(bad());
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task_name: String,
    pub catalog: FeatureCatalog,
    /// `N × D` encoded values; zero where unavailable.
    pub matrix: Array2<f64>,
    /// `N × d`, 1 where the feature is observed.
    pub availability: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub subject_ids: Vec<i64>,
    pub recipes: Vec<FeatureRecipe>,
    pub selection: Vec<SelectedVariable>,
    pub splits: Splits,
}

impl TaskDataset {
    /// Fully observed data with an identity recipe per feature.
    pub fn from_dense(
        task_name: &str,
        catalog: FeatureCatalog,
        matrix: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self, DataError> {
        let availability = Array2::ones((matrix.nrows(), catalog.len()));
        Self::from_parts(task_name, catalog, matrix, availability, labels, num_classes, seed)
    }

    pub fn from_parts(
        task_name: &str,
        catalog: FeatureCatalog,
        matrix: Array2<f64>,
        availability: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        let splits = stratified_split(&labels, 0.7, 0.15, seed);
        let recipes = catalog
            .entries()
            .iter()
            .map(|e| FeatureRecipe::Identity { variable: e.name.clone() })
            .collect();
        let ds = TaskDataset {
            task_name: task_name.into(),
            catalog,
            matrix,
            availability,
            labels,
            num_classes,
            subject_ids: (0..n as i64).collect(),
            recipes,
            selection: Vec::new(),
            splits,
        };
        ds.check_shapes()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.catalog.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i).to_slice().expect("standard layout")
    }

    pub fn observed(&self, i: usize) -> Vec<bool> {
        self.availability.row(i).iter().map(|&a| a > 0.5).collect()
    }

    /// Availability expanded to encoded columns (`N × D`).
    pub fn column_availability(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.matrix.dim());
        for j in 0..self.catalog.len() {
            for c in self.catalog.columns(j) {
                out.column_mut(c).assign(&self.availability.column(j));
            }
        }
        out
    }

    /// Rows of one split as owned arrays: `(matrix, availability, labels)`.
    pub fn subset(&self, rows: &[usize]) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
        (
            self.matrix.select(ndarray::Axis(0), rows),
            self.availability.select(ndarray::Axis(0), rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }

    /// Replaces feature costs by their category costs.
    pub fn restamp_costs(&mut self, table: &CostTable) -> Result<(), DataError> {
        self.catalog = crate::costs::assign_costs(&self.catalog, table)?;
        Ok(())
    }

    fn check_shapes(&self) -> Result<(), DataError> {
        let n = self.labels.len();
        let ok = self.matrix.dim() == (n, self.catalog.encoded_width())
            && self.availability.dim() == (n, self.catalog.len())
            && self.subject_ids.len() == n
            && self.recipes.len() == self.catalog.len()
            && self.matrix.is_standard_layout()
            && self.labels.iter().all(|&y| y < self.num_classes);
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidBundle("inconsistent dataset shapes".into()))
        }
    }

    /// Checks zero-fill, one-hot sums and standardization on the training split.
    pub fn check_invariants(&self) -> Result<(), DataError> {
        self.check_shapes()?;
        for i in 0..self.len() {
            for j in 0..self.catalog.len() {
                let a = self.availability[[i, j]];
                if a != 0.0 && a != 1.0 {
                    return Err(DataError::InvalidBundle(format!("availability[{i}][{j}] = {a}")));
                }
                let cols = self.catalog.columns(j);
                if a == 0.0 && cols.clone().any(|c| self.matrix[[i, c]] != 0.0) {
                    return Err(DataError::InvalidBundle(format!("row {i} feature {j} missing but non-zero")));
                }
                if a == 1.0 && matches!(self.recipes[j], FeatureRecipe::OneHot { .. }) {
                    let s: f64 = cols.map(|c| self.matrix[[i, c]]).sum();
                    if s != 1.0 {
                        return Err(DataError::InvalidBundle(format!("row {i} one-hot {j} sums to {s}")));
                    }
                }
            }
        }
        for (j, recipe) in self.recipes.iter().enumerate() {
            if !matches!(recipe, FeatureRecipe::Standardize { .. }) {
                continue;
            }
            let c = self.catalog.offset(j);
            let vals: Vec<f64> = self
                .splits
                .train
                .iter()
                .filter(|&&r| self.availability[[r, j]] > 0.5)
                .map(|&r| self.matrix[[r, c]])
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if mean.abs() > 1e-6 || (std - 1.0).abs() > 1e-6 {
                return Err(DataError::InvalidBundle(format!(
                    "feature {j}: train mean {mean}, std {std}"
                )));
            }
        }
        Ok(())
    }
}

struct Encoded {
    meta: FeatureMeta,
    recipe: FeatureRecipe,
    /// `N × width`.
    columns: Vec<Vec<f64>>,
    available: Vec<bool>,
    unseen: usize,
}

fn encode_variable(
    table: &VariableTable,
    kind: FeatureKind,
    subjects: &[i64],
    train: &[usize],
) -> Result<Encoded, DataError> {
    let lookup = table.lookup();
    let raw: Vec<&RawValue> = subjects.iter().map(|s| lookup.get(s).copied().unwrap_or(&RawValue::Missing)).collect();
    if kind.is_coded() {
        let codes: Vec<Option<String>> = raw.iter().map(|v| v.as_code()).collect();
        let vocab = Vocabulary::fit(train.iter().map(|&r| codes[r].as_deref()))?;
        let refs: Vec<Option<&str>> = codes.iter().map(|c| c.as_deref()).collect();
        let enc = one_hot(&refs, &vocab)?;
        let available: Vec<bool> = enc.rows.iter().map(|r| r.contains(&1.0)).collect();
        let meta = FeatureMeta::new(table.variable_id.clone(), kind, table.category, Cost::ZERO).with_width(vocab.len());
        Ok(Encoded {
            meta,
            recipe: FeatureRecipe::OneHot { variable: table.variable_id.clone(), vocabulary: vocab },
            columns: enc.rows,
            available,
            unseen: enc.unseen,
        })
    } else {
        let reals: Vec<Option<f64>> = raw.iter().map(|v| v.as_real()).collect();
        let train_vals: Vec<Option<f64>> = train.iter().map(|&r| reals[r]).collect();
        let stats = NormStats::fit(&train_vals)?;
        let available = reals.iter().map(Option::is_some).collect();
        let columns = reals.iter().map(|v| vec![v.map_or(0.0, |v| stats.apply(v))]).collect();
        let meta = FeatureMeta::new(table.variable_id.clone(), kind, table.category, Cost::ZERO);
        Ok(Encoded {
            meta,
            recipe: FeatureRecipe::Standardize { variable: table.variable_id.clone(), stats },
            columns,
            available,
            unseen: 0,
        })
    }
}

/// Joins the tables on subject id, labels, splits, selects and encodes.
/// Every fitted quantity comes from the training split only.
pub fn build_task(
    tables: &[VariableTable],
    task: &TaskDefinition,
    config: &PrepConfig,
    costs: &CostTable,
) -> Result<TaskDataset, DataError> {
    config.validate()?;
    let (all_labels, num_classes) = task.target.compute(tables)?;
    let mut subjects: BTreeSet<i64> = BTreeSet::new();
    for t in tables {
        subjects.extend(t.subject_ids.iter().copied());
    }
    let subject_ids: Vec<i64> = subjects.into_iter().filter(|s| all_labels.contains_key(s)).collect();
    if subject_ids.is_empty() {
        return Err(DataError::EmptyJoin);
    }
    let labels: Vec<usize> = subject_ids.iter().map(|s| all_labels[s]).collect();
    let splits = stratified_split(&labels, config.train_fraction, config.validation_fraction, config.seed);
    if splits.train.is_empty() {
        return Err(DataError::EmptyJoin);
    }

    let mut excluded = task.target.variables();
    excluded.extend(task.exclude.iter().cloned());
    let train_labels: BTreeMap<i64, usize> =
        splits.train.iter().map(|&r| (subject_ids[r], labels[r])).collect();
    let selection: Vec<SelectedVariable> = match &task.features {
        None => auto_select(
            tables,
            &train_labels,
            config.tau_mi,
            config.tau_avail,
            config.mi_bins,
            config.max_categories,
            &excluded,
        )?,
        Some(list) => list
            .iter()
            .map(|name| {
                if excluded.contains(name) {
                    return Err(DataError::InvalidConfig(format!("{name} defines the target")));
                }
                let t = tables
                    .iter()
                    .find(|t| &t.variable_id == name)
                    .ok_or_else(|| DataError::MissingVariable(name.clone()))?;
                score_variable(t, &train_labels, config.mi_bins, config.max_categories)
            })
            .collect::<Result<_, _>>()?,
    };
    info!("{}: {} subjects, {} candidate features", task.name, subject_ids.len(), selection.len());

    let encoded: Vec<Result<Encoded, DataError>> = selection
        .par_iter()
        .map(|s| {
            let t = tables.iter().find(|t| t.variable_id == s.variable_id).expect("selected from tables");
            encode_variable(t, s.kind, &subject_ids, &splits.train)
        })
        .collect();

    let mut kept = Vec::new();
    let mut kept_selection = Vec::new();
    for (s, e) in selection.into_iter().zip(encoded) {
        match e {
            Ok(e) => {
                kept.push(e);
                kept_selection.push(s);
            }
            Err(DataError::DegenerateColumn(why)) => warn!("dropping {}: {why}", s.variable_id),
            Err(DataError::EmptyVocabulary) => warn!("dropping {}: no training codes", s.variable_id),
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(DataError::NoFeaturesSelected);
    }
    let unseen: usize = kept.iter().map(|e| e.unseen).sum();
    if unseen > 0 {
        warn!("{unseen} categorical entries outside the training vocabulary were treated as missing");
    }

    let catalog = FeatureCatalog::new(kept.iter().map(|e| e.meta.clone()).collect())?;
    let catalog = crate::costs::assign_costs(&catalog, costs)?;
    let n = subject_ids.len();
    let mut matrix = Array2::zeros((n, catalog.encoded_width()));
    let mut availability = Array2::zeros((n, catalog.len()));
    for (j, e) in kept.iter().enumerate() {
        let off = catalog.offset(j);
        for i in 0..n {
            availability[[i, j]] = f64::from(u8::from(e.available[i]));
            for (w, v) in e.columns[i].iter().enumerate() {
                matrix[[i, off + w]] = *v;
            }
        }
    }
    let ds = TaskDataset {
        task_name: task.name.clone(),
        catalog,
        matrix,
        availability,
        labels,
        num_classes,
        subject_ids,
        recipes: kept.into_iter().map(|e| e.recipe).collect(),
        selection: kept_selection,
        splits,
    };
    ds.check_invariants()?;
    Ok(ds)
}

/// Category of a variable by NHANES naming prefix.
pub fn guess_category(variable_id: &str) -> Category {
    let v = variable_id.to_ascii_uppercase();
    if v.starts_with("LB") || v.starts_with("URX") {
        Category::Laboratory
    } else if v.starts_with("BPX") || v.starts_with("BMX") || v.starts_with("OHX") || v.starts_with("AUX") {
        Category::Examination
    } else if v.starts_with("RID") || v.starts_with("DMD") || v.starts_with("IND") || v.starts_with("SDM") {
        Category::Demographics
    } else {
        Category::Questionnaire
    }
}
