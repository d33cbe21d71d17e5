//! On-disk dataset bundle: `data.csv`, `availability.csv`, `catalog.csv`,
//! `splits.csv` and `manifest.json`. Floats are written in shortest
//! round-trip form so a reload is exact and reruns are byte-identical.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::task::{FeatureRecipe, PrepConfig, Splits, TaskDataset, TaskDefinition};
use super::{DataError, SelectedVariable};
use crate::acquisition::FeatureCatalog;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub task_name: String,
    pub num_rows: usize,
    pub num_features: usize,
    pub encoded_width: usize,
    pub num_classes: usize,
    pub recipes: Vec<FeatureRecipe>,
    pub selection: Vec<SelectedVariable>,
    #[serde(default)]
    pub task: Option<TaskDefinition>,
    #[serde(default)]
    pub config: Option<PrepConfig>,
}

fn column_names(ds: &TaskDataset) -> Vec<String> {
    let mut names = Vec::with_capacity(ds.catalog.encoded_width());
    for (j, e) in ds.catalog.entries().iter().enumerate() {
        match &ds.recipes[j] {
            FeatureRecipe::OneHot { vocabulary, .. } => {
                names.extend(vocabulary.codes.iter().map(|c| format!("{}={c}", e.name)))
            }
            _ => names.extend(ds.catalog.columns(j).map(|c| {
                if e.encoded_width == 1 {
                    e.name.clone()
                } else {
                    format!("{}#{}", e.name, c - ds.catalog.offset(j))
                }
            })),
        }
    }
    names
}

pub fn write_bundle(
    dir: &Path,
    ds: &TaskDataset,
    task: Option<&TaskDefinition>,
    config: Option<&PrepConfig>,
) -> Result<BundleManifest, DataError> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
    let mut header = vec!["subject_id".to_string(), "label".to_string()];
    header.extend(column_names(ds));
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.subject_ids[i].to_string(), ds.labels[i].to_string()];
        rec.extend(ds.matrix.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("availability.csv"))?;
    let mut header = vec!["subject_id".to_string()];
    header.extend(ds.catalog.entries().iter().map(|e| e.name.clone()));
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.subject_ids[i].to_string()];
        rec.extend(ds.availability.row(i).iter().map(|&a| if a > 0.5 { "1" } else { "0" }.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    fs::write(dir.join("catalog.csv"), ds.catalog.to_csv_string())?;

    let mut w = csv::Writer::from_path(dir.join("splits.csv"))?;
    w.write_record(["split", "row"])?;
    for (name, rows) in [("train", &ds.splits.train), ("validation", &ds.splits.validation), ("test", &ds.splits.test)] {
        for r in rows {
            w.write_record([name, &r.to_string()])?;
        }
    }
    w.flush()?;

    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        task_name: ds.task_name.clone(),
        num_rows: ds.len(),
        num_features: ds.num_features(),
        encoded_width: ds.catalog.encoded_width(),
        num_classes: ds.num_classes,
        recipes: ds.recipes.clone(),
        selection: ds.selection.clone(),
        task: task.cloned(),
        config: config.cloned(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

fn bad(msg: impl Into<String>) -> DataError {
    DataError::InvalidBundle(msg.into())
}

pub fn load_bundle(dir: &Path) -> Result<(TaskDataset, BundleManifest), DataError> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| DataError::Io(format!("{}: {e}", dir.join("manifest.json").display())))?;
    let manifest: BundleManifest = serde_json::from_str(&text)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(bad(format!("unsupported bundle version {}", manifest.version)));
    }
    let catalog = FeatureCatalog::read_csv(fs::File::open(dir.join("catalog.csv"))?)?;
    let (n, d, width) = (manifest.num_rows, catalog.len(), catalog.encoded_width());
    if d != manifest.num_features || width != manifest.encoded_width || manifest.recipes.len() != d {
        return Err(bad("catalog does not match manifest"));
    }

    let mut subject_ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * width);
    let mut r = csv::Reader::from_path(dir.join("data.csv"))?;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width + 2 {
            return Err(bad(format!("data.csv row has {} fields, expected {}", rec.len(), width + 2)));
        }
        subject_ids.push(rec[0].parse::<i64>().map_err(|_| bad("bad subject id"))?);
        labels.push(rec[1].parse::<usize>().map_err(|_| bad("bad label"))?);
        for f in rec.iter().skip(2) {
            values.push(f.parse::<f64>().map_err(|_| bad(format!("bad value {f:?}")))?);
        }
    }
    if labels.len() != n {
        return Err(bad(format!("data.csv has {} rows, manifest says {n}", labels.len())));
    }
    let matrix = Array2::from_shape_vec((n, width), values).expect("counted");

    let mut avail = Vec::with_capacity(n * d);
    let mut r = csv::Reader::from_path(dir.join("availability.csv"))?;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 || rec[0].parse::<i64>().ok() != subject_ids.get(i).copied() {
            return Err(bad(format!("availability.csv row {i} does not match data.csv")));
        }
        for f in rec.iter().skip(1) {
            avail.push(match f {
                "0" => 0.0,
                "1" => 1.0,
                _ => return Err(bad(format!("bad availability flag {f:?}"))),
            });
        }
    }
    let availability = Array2::from_shape_vec((n, d), avail).map_err(|_| bad("availability row count"))?;

    let mut splits = Splits::default();
    let mut r = csv::Reader::from_path(dir.join("splits.csv"))?;
    for rec in r.records() {
        let rec = rec?;
        let row: usize = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad split row"))?;
        if row >= n {
            return Err(bad(format!("split row {row} out of range")));
        }
        match &rec[0] {
            "train" => splits.train.push(row),
            "validation" => splits.validation.push(row),
            "test" => splits.test.push(row),
            other => return Err(bad(format!("unknown split {other:?}"))),
        }
    }

    let ds = TaskDataset {
        task_name: manifest.task_name.clone(),
        catalog,
        matrix,
        availability,
        labels,
        num_classes: manifest.num_classes,
        subject_ids,
        recipes: manifest.recipes.clone(),
        selection: manifest.selection.clone(),
        splits,
    };
    ds.check_invariants()?;
    Ok((ds, manifest))
}
