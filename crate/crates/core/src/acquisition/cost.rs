//! Exact fixed-point cost units.
//!
//! Costs are stored as integer micro-units so that trajectory sums are exact
//! and independent of summation order. Six decimal places cover every cost the
//! survey pipeline or a hand-written catalog can produce.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const MICROS_PER_UNIT: u64 = 1_000_000;
const DECIMALS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostParseError {
    #[error("empty cost literal")]
    Empty,
    #[error("invalid cost literal {0:?}")]
    Invalid(String),
    #[error("cost {0:?} has more than {DECIMALS} decimal places")]
    TooPrecise(String),
    #[error("cost {0:?} overflows")]
    Overflow(String),
}

/// A non-negative acquisition cost with exact decimal arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const MAX: Cost = Cost(u64::MAX);

    pub const fn from_units(units: u64) -> Cost {
        Cost(units * MICROS_PER_UNIT)
    }

    pub const fn from_micros(micros: u64) -> Cost {
        Cost(micros)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    /// Nearest representable cost, or `None` for negative / non-finite input.
    pub fn from_f64(value: f64) -> Option<Cost> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let micros = (value * MICROS_PER_UNIT as f64).round();
        if micros > u64::MAX as f64 {
            return None;
        }
        Some(Cost(micros as u64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: Cost) -> Option<Cost> {
        self.0.checked_add(other.0).map(Cost)
    }

    pub fn checked_sub(self, other: Cost) -> Option<Cost> {
        self.0.checked_sub(other.0).map(Cost)
    }

    pub fn saturating_add(self, other: Cost) -> Cost {
        Cost(self.0.saturating_add(other.0))
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0.checked_add(rhs.0).expect("cost overflow"))
    }
}

impl Sub for Cost {
    type Output = Cost;

    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0.checked_sub(rhs.0).expect("negative cost"))
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Cost> for Cost {
    fn sum<I: Iterator<Item = &'a Cost>>(iter: I) -> Cost {
        iter.copied().sum()
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / MICROS_PER_UNIT;
        let frac = self.0 % MICROS_PER_UNIT;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{frac:0width$}", width = DECIMALS);
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for Cost {
    type Err = CostParseError;

    fn from_str(s: &str) -> Result<Cost, CostParseError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(CostParseError::Empty);
        }
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        let digits_only = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (whole.is_empty() && frac.is_empty()) || !digits_only(whole) || !digits_only(frac) {
            return Err(CostParseError::Invalid(s.to_string()));
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > DECIMALS {
            return Err(CostParseError::TooPrecise(s.to_string()));
        }
        let overflow = || CostParseError::Overflow(s.to_string());
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| overflow())?
        };
        let frac_micros: u64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<width$}", width = DECIMALS).parse().map_err(|_| overflow())?
        };
        whole
            .checked_mul(MICROS_PER_UNIT)
            .and_then(|w| w.checked_add(frac_micros))
            .map(Cost)
            .ok_or_else(overflow)
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Cost, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(u64),
            Float(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(u) => u
                .checked_mul(MICROS_PER_UNIT)
                .map(Cost)
                .ok_or_else(|| serde::de::Error::custom("cost overflows")),
            Repr::Float(x) => {
                Cost::from_f64(x).ok_or_else(|| serde::de::Error::custom("invalid cost"))
            }
        }
    }
}
