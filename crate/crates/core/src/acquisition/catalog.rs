use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AcquisitionError, Cost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Real,
    Categorical,
    MultipleChoice,
    Binary,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Real => "real",
            FeatureKind::Categorical => "categorical",
            FeatureKind::MultipleChoice => "multiple-choice",
            FeatureKind::Binary => "binary",
        }
    }

    /// Kinds that are one-hot encoded rather than standardized.
    pub fn is_coded(self) -> bool {
        matches!(self, FeatureKind::Categorical | FeatureKind::MultipleChoice)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = AcquisitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(FeatureKind::Real),
            "categorical" => Ok(FeatureKind::Categorical),
            "multiple-choice" | "multiple_choice" => Ok(FeatureKind::MultipleChoice),
            "binary" => Ok(FeatureKind::Binary),
            other => Err(AcquisitionError::InvalidCatalog(format!("unknown kind {other:?}"))),
        }
    }
}

/// Survey category a feature is priced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Demographics,
    Questionnaire,
    Examination,
    Laboratory,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Demographics,
        Category::Questionnaire,
        Category::Examination,
        Category::Laboratory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Demographics => "demographics",
            Category::Questionnaire => "questionnaire",
            Category::Examination => "examination",
            Category::Laboratory => "laboratory",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = AcquisitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "demographics" | "demo" => Ok(Category::Demographics),
            "questionnaire" | "behavioral" | "q" => Ok(Category::Questionnaire),
            "examination" | "exam" => Ok(Category::Examination),
            "laboratory" | "lab" => Ok(Category::Laboratory),
            other => Err(AcquisitionError::InvalidCatalog(format!(
                "unknown category {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub category: Category,
    pub cost: Cost,
    pub encoded_width: usize,
}

impl FeatureMeta {
    pub fn new(name: impl Into<String>, kind: FeatureKind, category: Category, cost: Cost) -> Self {
        FeatureMeta { name: name.into(), kind, category, cost, encoded_width: 1 }
    }

    pub fn with_width(mut self, width: usize) -> Self {
        self.encoded_width = width;
        self
    }
}

/// Ordered per-feature metadata. Feature `j` occupies the encoded columns
/// `offset(j)..offset(j) + width(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureMeta>", into = "Vec<FeatureMeta>")]
pub struct FeatureCatalog {
    entries: Vec<FeatureMeta>,
    offsets: Vec<usize>,
}

impl FeatureCatalog {
    pub fn new(entries: Vec<FeatureMeta>) -> Result<Self, AcquisitionError> {
        if entries.is_empty() {
            return Err(AcquisitionError::InvalidCatalog("catalog is empty".into()));
        }
        Self::build(entries)
    }

    /// An empty catalog is only meaningful as the input/output of cost stamping.
    pub fn empty() -> Self {
        FeatureCatalog { entries: Vec::new(), offsets: vec![0] }
    }

    fn build(entries: Vec<FeatureMeta>) -> Result<Self, AcquisitionError> {
        let mut seen = HashSet::new();
        let mut offsets = Vec::with_capacity(entries.len() + 1);
        let mut offset = 0;
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(AcquisitionError::InvalidCatalog(format!(
                    "duplicate feature name {:?}",
                    e.name
                )));
            }
            if e.encoded_width == 0 {
                return Err(AcquisitionError::InvalidCatalog(format!(
                    "feature {:?} has zero encoded width",
                    e.name
                )));
            }
            if !e.kind.is_coded() && e.encoded_width != 1 {
                return Err(AcquisitionError::InvalidCatalog(format!(
                    "{} feature {:?} must have encoded width 1",
                    e.kind, e.name
                )));
            }
            offsets.push(offset);
            offset += e.encoded_width;
        }
        offsets.push(offset);
        Ok(FeatureCatalog { entries, offsets })
    }

    /// Uniform catalog of `d` real features with the given costs; handy for
    /// synthetic tasks.
    pub fn real_features(costs: &[Cost]) -> Result<Self, AcquisitionError> {
        Self::new(
            costs
                .iter()
                .enumerate()
                .map(|(j, &c)| FeatureMeta::new(format!("f{j}"), FeatureKind::Real, Category::Examination, c))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureMeta] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> Option<&FeatureMeta> {
        self.entries.get(j)
    }

    pub fn cost(&self, j: usize) -> Cost {
        self.entries[j].cost
    }

    pub fn costs(&self) -> Vec<Cost> {
        self.entries.iter().map(|e| e.cost).collect()
    }

    pub fn total_cost(&self) -> Cost {
        self.entries.iter().map(|e| e.cost).sum()
    }

    /// Total number of encoded columns.
    pub fn encoded_width(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn columns(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Feature index owning encoded column `col`.
    pub fn feature_of_column(&self, col: usize) -> usize {
        match self.offsets.binary_search(&col) {
            Ok(j) => j,
            Err(j) => j - 1,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Returns a copy with every cost replaced by `f(j, meta)`.
    pub fn map_costs(&self, mut f: impl FnMut(usize, &FeatureMeta) -> Cost) -> Self {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(j, e)| FeatureMeta { cost: f(j, e), ..e.clone() })
            .collect();
        FeatureCatalog { entries, offsets: self.offsets.clone() }
    }

    /// Writes the `name,kind,category,cost,encoded_width` CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), AcquisitionError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "kind", "category", "cost", "encoded_width"])?;
        for e in &self.entries {
            w.write_record([
                e.name.as_str(),
                e.kind.name(),
                e.category.name(),
                &e.cost.to_string(),
                &e.encoded_width.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8 catalog")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, AcquisitionError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["name", "kind", "category", "cost", "encoded_width"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(AcquisitionError::InvalidCatalog(format!(
                "catalog header must be {}",
                expected.join(",")
            )));
        }
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let cost = rec[3]
                .parse::<Cost>()
                .map_err(|e| AcquisitionError::InvalidCatalog(e.to_string()))?;
            let encoded_width = rec[4].trim().parse::<usize>().map_err(|_| {
                AcquisitionError::InvalidCatalog(format!("bad encoded_width {:?}", &rec[4]))
            })?;
            entries.push(FeatureMeta {
                name: rec[0].to_string(),
                kind: rec[1].parse()?,
                category: rec[2].parse()?,
                cost,
                encoded_width,
            });
        }
        if entries.is_empty() {
            return Ok(Self::empty());
        }
        Self::new(entries)
    }
}

impl TryFrom<Vec<FeatureMeta>> for FeatureCatalog {
    type Error = AcquisitionError;

    fn try_from(entries: Vec<FeatureMeta>) -> Result<Self, Self::Error> {
        if entries.is_empty() {
            Ok(Self::empty())
        } else {
            Self::new(entries)
        }
    }
}

impl From<FeatureCatalog> for Vec<FeatureMeta> {
    fn from(c: FeatureCatalog) -> Self {
        c.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(name: &str, kind: FeatureKind, width: usize) -> FeatureMeta {
        FeatureMeta::new(name, kind, Category::Laboratory, Cost::from_units(9)).with_width(width)
    }

    #[test]
    fn rejects_bad_catalogs() {
        assert!(FeatureCatalog::new(vec![]).is_err());
        assert!(FeatureCatalog::new(vec![
            meta("a", FeatureKind::Real, 1),
            meta("a", FeatureKind::Real, 1)
        ])
        .is_err());
        assert!(FeatureCatalog::new(vec![meta("a", FeatureKind::Real, 2)]).is_err());
        assert!(FeatureCatalog::new(vec![meta("a", FeatureKind::Categorical, 0)]).is_err());
    }

    #[test]
    fn column_layout() {
        let c = FeatureCatalog::new(vec![
            meta("a", FeatureKind::Real, 1),
            meta("b", FeatureKind::Categorical, 3),
            meta("c", FeatureKind::Binary, 1),
        ])
        .unwrap();
        assert_eq!(c.encoded_width(), 5);
        assert_eq!(c.columns(1), 1..4);
        assert_eq!(c.feature_of_column(0), 0);
        assert_eq!(c.feature_of_column(3), 1);
        assert_eq!(c.feature_of_column(4), 2);
    }

    #[test]
    fn csv_roundtrip() {
        let c = FeatureCatalog::new(vec![
            FeatureMeta::new("RIDAGEYR", FeatureKind::Real, Category::Demographics, Cost::from_units(2)),
            FeatureMeta::new("SMQ020", FeatureKind::Categorical, Category::Questionnaire, "4.5".parse().unwrap())
                .with_width(3),
        ])
        .unwrap();
        let text = c.to_csv_string();
        assert!(text.starts_with("name,kind,category,cost,encoded_width\n"));
        assert!(text.contains("SMQ020,categorical,questionnaire,4.5,3"));
        assert_eq!(FeatureCatalog::read_csv(text.as_bytes()).unwrap(), c);
    }
}
