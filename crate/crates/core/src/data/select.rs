use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::mi::{mutual_information, FeatureColumn};
use super::{DataError, RawValue, VariableTable};
use crate::acquisition::FeatureKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedVariable {
    pub variable_id: String,
    pub kind: FeatureKind,
    /// Nats, training split.
    pub mutual_information: f64,
    /// Fraction of labeled training subjects with a value.
    pub availability: f64,
}

/// Guesses a preprocessing kind from the values: any non-numeric code or a
/// small set of integer codes means categorical, two distinct numbers mean
/// binary, anything else is real.
pub fn infer_kind<'a>(values: impl IntoIterator<Item = &'a RawValue>, max_categories: usize) -> FeatureKind {
    let mut distinct: BTreeSet<u64> = BTreeSet::new();
    let mut all_integer = true;
    for v in values {
        match v {
            RawValue::Code(_) => return FeatureKind::Categorical,
            RawValue::Real(x) => {
                all_integer &= x.fract() == 0.0;
                if distinct.len() <= max_categories {
                    distinct.insert(x.to_bits());
                }
            }
            RawValue::Missing => {}
        }
    }
    match distinct.len() {
        0..=2 => FeatureKind::Binary,
        n if all_integer && n <= max_categories => FeatureKind::Categorical,
        _ => FeatureKind::Real,
    }
}

/// Resolved kind of a table: the declared one if present.
pub fn table_kind(table: &VariableTable, max_categories: usize) -> FeatureKind {
    table.declared_kind.unwrap_or_else(|| infer_kind(&table.values, max_categories))
}

/// Kind, MI and availability of one variable over the subjects in `labels`.
/// A variable without two label values among its available rows scores 0.
pub fn score_variable(
    table: &VariableTable,
    labels: &BTreeMap<i64, usize>,
    bins: usize,
    max_categories: usize,
) -> Result<SelectedVariable, DataError> {
    let y: Vec<usize> = labels.values().copied().collect();
    let lookup = table.lookup();
    let column: Vec<&RawValue> =
        labels.keys().map(|s| lookup.get(s).copied().unwrap_or(&RawValue::Missing)).collect();
    let kind = table
        .declared_kind
        .unwrap_or_else(|| infer_kind(column.iter().copied(), max_categories));
    let present = column.iter().filter(|v| !v.is_missing()).count();
    let availability = if labels.is_empty() { 0.0 } else { present as f64 / labels.len() as f64 };
    let mi = if kind.is_coded() {
        let codes: Vec<Option<String>> = column.iter().map(|v| v.as_code()).collect();
        let refs: Vec<Option<&str>> = codes.iter().map(|c| c.as_deref()).collect();
        mutual_information(FeatureColumn::Coded(&refs), &y, bins)
    } else {
        let reals: Vec<Option<f64>> = column.iter().map(|v| v.as_real()).collect();
        mutual_information(FeatureColumn::Real(&reals), &y, bins)
    };
    let mi = match mi {
        Ok(v) => v,
        Err(DataError::InsufficientData(_)) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(SelectedVariable { variable_id: table.variable_id.clone(), kind, mutual_information: mi, availability })
}

/// Keeps variables whose MI with the label reaches `tau_mi` and whose
/// availability reaches `tau_avail`, both measured over the subjects in
/// `labels`. Output is ordered by descending MI, then name.
pub fn auto_select(
    tables: &[VariableTable],
    labels: &BTreeMap<i64, usize>,
    tau_mi: f64,
    tau_avail: f64,
    bins: usize,
    max_categories: usize,
    exclude: &[String],
) -> Result<Vec<SelectedVariable>, DataError> {
    if tau_mi < 0.0 || !(0.0..=1.0).contains(&tau_avail) {
        return Err(DataError::InvalidConfig(format!(
            "thresholds out of range: tau_mi={tau_mi}, tau_avail={tau_avail}"
        )));
    }
    let mut selected = Vec::new();
    for table in tables {
        if exclude.iter().any(|e| e == &table.variable_id) {
            continue;
        }
        let scored = score_variable(table, labels, bins, max_categories)?;
        if scored.mutual_information >= tau_mi && scored.availability >= tau_avail {
            selected.push(scored);
        }
    }
    if selected.is_empty() {
        return Err(DataError::NoFeaturesSelected);
    }
    selected.sort_by(|a, b| {
        b.mutual_information
            .total_cmp(&a.mutual_information)
            .then_with(|| a.variable_id.cmp(&b.variable_id))
    });
    Ok(selected)
}
