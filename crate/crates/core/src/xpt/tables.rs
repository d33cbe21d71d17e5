use std::collections::BTreeMap;

use log::warn;

use super::document::{VarType, XptDocument, XptValue};
use super::XptError;
use crate::acquisition::Category;
use crate::data::{guess_category, RawValue, VariableTable};

/// Tables extracted from one document.
#[derive(Debug, Clone, PartialEq)]
pub struct XptImport {
    pub tables: Vec<VariableTable>,
    /// Rows whose subject id had already been seen; the later row wins.
    pub duplicate_subjects: usize,
    /// Rows dropped because the subject id was missing.
    pub missing_ids: usize,
}

/// One table per non-id variable across all members that carry `id_variable`.
/// `category` of `None` guesses from the variable name prefix.
pub fn to_variable_tables(
    doc: &XptDocument,
    id_variable: &str,
    category: Option<Category>,
) -> Result<XptImport, XptError> {
    let mut order: Vec<String> = Vec::new();
    let mut columns: BTreeMap<String, BTreeMap<i64, RawValue>> = BTreeMap::new();
    let mut duplicate_subjects = 0;
    let mut missing_ids = 0;
    let mut found = false;
    for m in &doc.members {
        let Some(id_col) = m.variable_index(id_variable) else { continue };
        if m.variables[id_col].var_type != VarType::Numeric {
            return Err(XptError::NonNumericId(id_variable.into()));
        }
        found = true;
        let mut seen = std::collections::BTreeSet::new();
        for row in &m.rows {
            let id = match row[id_col].as_number() {
                Some(v) if v.fract() == 0.0 && v.abs() < 9e15 => v as i64,
                _ => {
                    missing_ids += 1;
                    continue;
                }
            };
            if !seen.insert(id) {
                duplicate_subjects += 1;
            }
            for (k, v) in m.variables.iter().enumerate() {
                if k == id_col {
                    continue;
                }
                let raw = match &row[k] {
                    XptValue::Number(x) => RawValue::Real(*x),
                    XptValue::Missing(_) => RawValue::Missing,
                    XptValue::Text(s) if s.is_empty() => RawValue::Missing,
                    XptValue::Text(s) => RawValue::Code(s.clone()),
                };
                let col = columns.entry(v.name.clone()).or_insert_with(|| {
                    order.push(v.name.clone());
                    BTreeMap::new()
                });
                col.insert(id, raw);
            }
        }
    }
    if !found {
        return Err(XptError::MissingIdVariable(id_variable.into()));
    }
    if duplicate_subjects > 0 {
        warn!("{duplicate_subjects} duplicate {id_variable} rows; kept the last occurrence");
    }
    let tables = order
        .into_iter()
        .map(|name| {
            let col = columns.remove(&name).expect("recorded");
            let cat = category.unwrap_or_else(|| guess_category(&name));
            let (ids, values) = col.into_iter().unzip();
            VariableTable::new(name, cat, ids, values).expect("ids unique by construction")
        })
        .collect();
    Ok(XptImport { tables, duplicate_subjects, missing_ids })
}
