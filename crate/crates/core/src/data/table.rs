use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::acquisition::{Category, FeatureKind};

/// One raw cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Real(f64),
    Code(String),
    Missing,
}

impl RawValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, RawValue::Missing)
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            RawValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    /// Categorical code; numbers are rendered with their shortest form.
    pub fn as_code(&self) -> Option<String> {
        match self {
            RawValue::Real(v) => Some(format!("{v}")),
            RawValue::Code(c) => Some(c.clone()),
            RawValue::Missing => None,
        }
    }

    /// Parses a CSV cell: empty or `.` is missing, numbers are real,
    /// anything else is a code.
    pub fn parse(cell: &str) -> RawValue {
        let t = cell.trim();
        if t.is_empty() || t == "." || t.eq_ignore_ascii_case("na") {
            return RawValue::Missing;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => RawValue::Real(v),
            _ => RawValue::Code(t.to_string()),
        }
    }

    fn render(&self) -> String {
        match self {
            RawValue::Real(v) => format!("{v}"),
            RawValue::Code(c) => c.clone(),
            RawValue::Missing => String::new(),
        }
    }
}

/// Values of one variable keyed by subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableTable {
    pub variable_id: String,
    pub category: Category,
    pub declared_kind: Option<FeatureKind>,
    pub subject_ids: Vec<i64>,
    pub values: Vec<RawValue>,
}

impl VariableTable {
    pub fn new(
        variable_id: impl Into<String>,
        category: Category,
        subject_ids: Vec<i64>,
        values: Vec<RawValue>,
    ) -> Result<Self, DataError> {
        let t = VariableTable {
            variable_id: variable_id.into(),
            category,
            declared_kind: None,
            subject_ids,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_kind(mut self, kind: FeatureKind) -> Self {
        self.declared_kind = Some(kind);
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.subject_ids.len() != self.values.len() {
            return Err(DataError::InvalidTable(format!(
                "{}: {} subjects but {} values",
                self.variable_id,
                self.subject_ids.len(),
                self.values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(self.subject_ids.len());
        for id in &self.subject_ids {
            if !seen.insert(id) {
                return Err(DataError::InvalidTable(format!(
                    "{}: duplicate subject {id}",
                    self.variable_id
                )));
            }
        }
        Ok(())
    }

    pub fn lookup(&self) -> BTreeMap<i64, &RawValue> {
        self.subject_ids.iter().copied().zip(self.values.iter()).collect()
    }

    /// Writes the `subject_id,value` CSV form.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["subject_id", "value"]).expect("in-memory");
        for (id, v) in self.subject_ids.iter().zip(&self.values) {
            w.write_record([id.to_string(), v.render()]).expect("in-memory");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(
        variable_id: &str,
        category: Category,
        text: &str,
    ) -> Result<Self, DataError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(DataError::InvalidTable(format!("{variable_id}: short record")));
            }
            let id = rec[0].trim().parse::<f64>().ok().filter(|v| v.fract() == 0.0).ok_or_else(|| {
                DataError::InvalidTable(format!("{variable_id}: bad subject id {:?}", &rec[0]))
            })?;
            ids.push(id as i64);
            values.push(RawValue::parse(&rec[1]));
        }
        VariableTable::new(variable_id, category, ids, values)
    }
}

/// Index row of a variable directory (`variables.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndexEntry {
    pub variable_id: String,
    pub category: Category,
    pub kind: Option<FeatureKind>,
}

/// Writes `variables.csv` plus one `<variable>.csv` per table.
pub fn write_variable_dir(dir: &Path, tables: &[VariableTable]) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    let mut index = csv::Writer::from_writer(Vec::new());
    index.write_record(["variable_id", "category", "kind"])?;
    for t in tables {
        index.write_record([
            t.variable_id.as_str(),
            t.category.name(),
            t.declared_kind.map(|k| k.name()).unwrap_or(""),
        ])?;
        fs::write(dir.join(format!("{}.csv", t.variable_id)), t.to_csv_string())?;
    }
    fs::write(dir.join("variables.csv"), index.into_inner().map_err(|e| DataError::Io(e.to_string()))?)?;
    Ok(())
}

/// Reads a directory written by [`write_variable_dir`] (or by hand).
pub fn read_variable_dir(dir: &Path) -> Result<Vec<VariableTable>, DataError> {
    let index_text = fs::read_to_string(dir.join("variables.csv"))
        .map_err(|e| DataError::Io(format!("{}: {e}", dir.join("variables.csv").display())))?;
    let mut r = csv::Reader::from_reader(index_text.as_bytes());
    let mut tables = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        let category: Category = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::acquisition::AcquisitionError| DataError::InvalidTable(e.to_string()))?;
        let kind = match rec.get(2).map(str::trim) {
            None | Some("") => None,
            Some(k) => Some(
                k.parse::<FeatureKind>()
                    .map_err(|e| DataError::InvalidTable(e.to_string()))?,
            ),
        };
        let path = dir.join(format!("{id}.csv"));
        let text = fs::read_to_string(&path)
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        let mut t = VariableTable::from_csv(&id, category, &text)?;
        t.declared_kind = kind;
        tables.push(t);
    }
    Ok(tables)
}
