//! Target definitions of the three health tasks.

use super::DataError;

pub const DIABETES_CLASSES: [&str; 3] = ["normal", "prediabetes", "diabetes"];

fn check_measurement(v: f64, what: &str) -> Result<(), DataError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DataError::InvalidMeasurement(format!("{what} = {v}")))
    }
}

/// Fasting glucose (mg/dL): below 100 normal, 100 to 125 inclusive
/// prediabetes, above 125 diabetes.
pub fn label_diabetes(glucose: f64) -> Result<usize, DataError> {
    check_measurement(glucose, "glucose")?;
    Ok(if glucose < 100.0 {
        0
    } else if glucose <= 125.0 {
        1
    } else {
        2
    })
}

/// Systolic pressure strictly above 140 mmHg is positive.
pub fn label_hypertension(systolic: f64) -> Result<usize, DataError> {
    check_measurement(systolic, "systolic pressure")?;
    Ok(usize::from(systolic > 140.0))
}

/// Positive if any history indicator is affirmative. Returns `None` when every
/// indicator is missing; such subjects are left out of the task.
pub fn label_heart_disease(indicators: &[Option<bool>]) -> Result<Option<usize>, DataError> {
    if indicators.is_empty() {
        return Err(DataError::NoIndicatorsConfigured);
    }
    if indicators.iter().all(Option::is_none) {
        return Ok(None);
    }
    Ok(Some(usize::from(indicators.contains(&Some(true)))))
}
