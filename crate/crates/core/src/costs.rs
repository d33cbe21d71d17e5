//! Survey-derived acquisition costs.
//!
//! Respondents rate the convenience (1 = least, 10 = most convenient) of
//! providing each feature category. The per-question median is converted to a
//! cost of `11 - median` and stamped onto every feature of that category.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{Category, Cost, FeatureCatalog};

/// Question order of the convenience survey.
pub const QUESTION_CATEGORIES: [Category; 4] = [
    Category::Demographics,
    Category::Questionnaire,
    Category::Examination,
    Category::Laboratory,
];

/// Survey summary shipped with the crate (one row holding the medians).
pub const REFERENCE_SURVEY_CSV: &str = include_str!("../fixtures/survey.csv");

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("survey has no responses")]
    EmptySurvey,
    #[error("answer {0} outside 1..=10")]
    OutOfRange(i64),
    #[error("catalog category {0} has no cost")]
    UnmappedCategory(Category),
    #[error("malformed survey: {0}")]
    Malformed(String),
}

impl From<csv::Error> for CostError {
    fn from(e: csv::Error) -> Self {
        CostError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurveyResponse {
    answers: [u8; 4],
}

impl SurveyResponse {
    pub fn new(answers: [i64; 4]) -> Result<Self, CostError> {
        let mut out = [0u8; 4];
        for (o, a) in out.iter_mut().zip(answers) {
            if !(1..=10).contains(&a) {
                return Err(CostError::OutOfRange(a));
            }
            *o = a as u8;
        }
        Ok(SurveyResponse { answers: out })
    }

    pub fn answers(&self) -> [u8; 4] {
        self.answers
    }
}

/// Reads `respondent_id,q1,q2,q3,q4`.
pub fn read_survey_csv<R: Read>(reader: R) -> Result<Vec<SurveyResponse>, CostError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(CostError::Malformed(format!("expected 5 fields, got {}", rec.len())));
        }
        let mut answers = [0i64; 4];
        for (i, a) in answers.iter_mut().enumerate() {
            *a = rec[i + 1]
                .trim()
                .parse()
                .map_err(|_| CostError::Malformed(format!("bad answer {:?}", &rec[i + 1])))?;
        }
        out.push(SurveyResponse::new(answers)?);
    }
    Ok(out)
}

/// Per-question lower median (element `ceil(n/2)` of the sorted answers).
pub fn aggregate_medians(responses: &[SurveyResponse]) -> Result<[u8; 4], CostError> {
    if responses.is_empty() {
        return Err(CostError::EmptySurvey);
    }
    let mut medians = [0u8; 4];
    for (q, m) in medians.iter_mut().enumerate() {
        let mut answers: Vec<u8> = responses.iter().map(|r| r.answers[q]).collect();
        answers.sort_unstable();
        *m = answers[answers.len().div_ceil(2) - 1];
    }
    Ok(medians)
}

pub fn convenience_to_cost(median: u8) -> Result<u8, CostError> {
    if !(1..=10).contains(&median) {
        return Err(CostError::OutOfRange(median as i64));
    }
    Ok(11 - median)
}

/// Cost per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    costs: BTreeMap<Category, u8>,
}

impl CostTable {
    pub fn from_medians(medians: [u8; 4]) -> Result<Self, CostError> {
        let mut costs = BTreeMap::new();
        for (cat, m) in QUESTION_CATEGORIES.iter().zip(medians) {
            costs.insert(*cat, convenience_to_cost(m)?);
        }
        Ok(CostTable { costs })
    }

    pub fn from_survey(responses: &[SurveyResponse]) -> Result<Self, CostError> {
        Self::from_medians(aggregate_medians(responses)?)
    }

    /// Table derived from the bundled survey summary.
    pub fn reference() -> Self {
        let responses = read_survey_csv(REFERENCE_SURVEY_CSV.as_bytes()).expect("bundled survey parses");
        Self::from_survey(&responses).expect("bundled survey is valid")
    }

    pub fn get(&self, category: Category) -> Option<u8> {
        self.costs.get(&category).copied()
    }

    pub fn cost(&self, category: Category) -> Result<Cost, CostError> {
        self.get(category)
            .map(|c| Cost::from_units(c as u64))
            .ok_or(CostError::UnmappedCategory(category))
    }

    /// Costs in question order.
    pub fn in_question_order(&self) -> Vec<u8> {
        QUESTION_CATEGORIES.iter().filter_map(|c| self.get(*c)).collect()
    }

    /// Writes `category,cost` rows in question order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CostError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["category", "cost"])?;
        for cat in QUESTION_CATEGORIES {
            if let Some(c) = self.get(cat) {
                w.write_record([cat.name(), &c.to_string()])?;
            }
        }
        w.flush().map_err(|e| CostError::Malformed(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Sets each feature's cost to its category's cost; nothing else changes.
pub fn assign_costs(catalog: &FeatureCatalog, table: &CostTable) -> Result<FeatureCatalog, CostError> {
    for e in catalog.entries() {
        table.cost(e.category)?;
    }
    Ok(catalog.map_costs(|_, e| table.cost(e.category).expect("checked above")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{FeatureKind, FeatureMeta};
    use proptest::prelude::*;

    fn responses(rows: &[[i64; 4]]) -> Vec<SurveyResponse> {
        rows.iter().map(|r| SurveyResponse::new(*r).unwrap()).collect()
    }

    #[test]
    fn medians() {
        let r = responses(&[[9, 1, 1, 1], [9, 1, 1, 1], [10, 1, 1, 1]]);
        assert_eq!(aggregate_medians(&r).unwrap()[0], 9);
        let r = responses(&[[2, 1, 1, 1], [8, 1, 1, 1]]);
        assert_eq!(aggregate_medians(&r).unwrap()[0], 2);
        let r = responses(&[[3, 4, 5, 6]]);
        assert_eq!(aggregate_medians(&r).unwrap(), [3, 4, 5, 6]);
        assert_eq!(aggregate_medians(&[]), Err(CostError::EmptySurvey));
    }

    #[test]
    fn conversion() {
        assert_eq!(convenience_to_cost(9).unwrap(), 2);
        assert_eq!(convenience_to_cost(2).unwrap(), 9);
        assert_eq!(convenience_to_cost(10).unwrap(), 1);
        assert!(convenience_to_cost(0).is_err());
        assert!(convenience_to_cost(11).is_err());
        assert!(SurveyResponse::new([1, 2, 3, 11]).is_err());
    }

    #[test]
    fn reference_table() {
        assert_eq!(CostTable::reference().in_question_order(), vec![2, 4, 5, 9]);
        assert_eq!(
            CostTable::reference().to_csv_string(),
            "category,cost\ndemographics,2\nquestionnaire,4\nexamination,5\nlaboratory,9\n"
        );
    }

    #[test]
    fn stamping() {
        let lab = |n: &str| FeatureMeta::new(n, FeatureKind::Real, Category::Laboratory, Cost::ZERO);
        let cat = FeatureCatalog::new(vec![lab("a"), lab("b"), lab("c")]).unwrap();
        let stamped = assign_costs(&cat, &CostTable::reference()).unwrap();
        assert!(stamped.entries().iter().all(|e| e.cost == Cost::from_units(9)));
        assert_eq!(stamped.entries()[1].name, "b");

        let empty = FeatureCatalog::empty();
        assert!(assign_costs(&empty, &CostTable::reference()).unwrap().is_empty());

        let partial = CostTable { costs: BTreeMap::from([(Category::Demographics, 2)]) };
        assert_eq!(assign_costs(&cat, &partial), Err(CostError::UnmappedCategory(Category::Laboratory)));
    }

    proptest! {
        #[test]
        fn costs_in_range_and_antitone(rows in prop::collection::vec(prop::array::uniform4(1i64..=10), 1..60)) {
            let r = responses(&rows);
            let medians = aggregate_medians(&r).unwrap();
            let table = CostTable::from_medians(medians).unwrap();
            for (i, a) in QUESTION_CATEGORIES.iter().enumerate() {
                let ca = table.get(*a).unwrap();
                prop_assert!((1..=10).contains(&ca));
                for (k, b) in QUESTION_CATEGORIES.iter().enumerate() {
                    if medians[i] > medians[k] {
                        prop_assert!(ca <= table.get(*b).unwrap());
                    }
                }
            }
        }
    }
}
