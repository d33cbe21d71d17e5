//! Fixed-point binary representation of bounded feature values.
//!
//! A value in `[0, 1 - 2^-l]` is written as `l` fractional bits, most
//! significant first; bit `m` (1-based) carries weight `2^-m`.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::NnError;

pub const DEFAULT_LEVELS: usize = 3;

/// Largest value representable with `levels` bits.
pub fn max_code_value(levels: usize) -> f64 {
    1.0 - 0.5f64.powi(levels as i32)
}

pub fn encode_binary(value: f64, levels: usize) -> Result<Vec<u8>, NnError> {
    if levels == 0 || levels > 52 {
        return Err(NnError::InvalidConfig(format!("unsupported level count {levels}")));
    }
    let max = max_code_value(levels);
    if !value.is_finite() || value < -1e-12 || value > max + 1e-12 {
        return Err(NnError::OutOfRange { value, max });
    }
    let scale = (1u64 << levels) as f64;
    let code = (value.clamp(0.0, max) * scale).round() as u64;
    Ok((0..levels).map(|m| ((code >> (levels - 1 - m)) & 1) as u8).collect())
}

/// `Σ bits_m · 2^-m`; accepts soft bits.
pub fn decode_binary(bits: &[f64]) -> f64 {
    bits.iter().enumerate().map(|(m, b)| b * 0.5f64.powi(m as i32 + 1)).sum()
}

/// Per-feature code: bits (hard or probabilistic) and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryCode {
    pub bits: Vec<f64>,
}

impl BinaryCode {
    pub fn levels(&self) -> usize {
        self.bits.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        (1..=self.bits.len()).map(|m| 0.5f64.powi(m as i32)).collect()
    }

    pub fn decode(&self) -> f64 {
        decode_binary(&self.bits)
    }
}

/// Min-max scales each encoded column into the code range, then binarizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryEncoder {
    pub levels: usize,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl BinaryEncoder {
    /// Column ranges from training rows; `available` holds 1 where a column
    /// entry was observed.
    pub fn fit(
        x: ArrayView2<f64>,
        available: ArrayView2<f64>,
        levels: usize,
    ) -> Result<Self, NnError> {
        if levels == 0 || levels > 52 {
            return Err(NnError::InvalidConfig(format!("unsupported level count {levels}")));
        }
        if x.dim() != available.dim() {
            return Err(NnError::DimensionMismatch { expected: x.ncols(), found: available.ncols() });
        }
        let mut mins = vec![0.0; x.ncols()];
        let mut maxs = vec![0.0; x.ncols()];
        for c in 0..x.ncols() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..x.nrows() {
                if available[[r, c]] > 0.5 {
                    lo = lo.min(x[[r, c]]);
                    hi = hi.max(x[[r, c]]);
                }
            }
            if lo.is_finite() {
                mins[c] = lo;
                maxs[c] = hi;
            }
        }
        Ok(BinaryEncoder { levels, mins, maxs })
    }

    pub fn columns(&self) -> usize {
        self.mins.len()
    }

    pub fn code_width(&self) -> usize {
        self.columns() * self.levels
    }

    /// Scaled value of column `c` inside `[0, 1 - 2^-l]`.
    pub fn scale(&self, c: usize, value: f64) -> f64 {
        let span = self.maxs[c] - self.mins[c];
        if span <= 0.0 {
            return 0.0;
        }
        ((value - self.mins[c]) / span).clamp(0.0, 1.0) * max_code_value(self.levels)
    }

    /// Hard bits of every column of `values`.
    pub fn hard_bits(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.code_width());
        for (c, &v) in values.iter().enumerate() {
            let bits = encode_binary(self.scale(c, v), self.levels).expect("scaled into range");
            out.extend(bits.into_iter().map(f64::from));
        }
        out
    }

    /// Hard bits where `column_mask` is 1, `0.5` elsewhere.
    pub fn corrupted_bits(&self, values: &[f64], column_mask: &[f64]) -> Vec<f64> {
        let mut out = self.hard_bits(values);
        for (c, &m) in column_mask.iter().enumerate() {
            if m < 0.5 {
                out[c * self.levels..(c + 1) * self.levels].iter_mut().for_each(|b| *b = 0.5);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_binary(0.5, 3).unwrap(), vec![1, 0, 0]);
        assert_eq!(encode_binary(0.0, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(encode_binary(0.875, 3).unwrap(), vec![1, 1, 1]);
        assert!(matches!(encode_binary(0.9, 3), Err(NnError::OutOfRange { .. })));
        assert!(encode_binary(-0.1, 3).is_err());
    }

    #[test]
    fn code_weights() {
        let code = BinaryCode { bits: vec![1.0, 0.0, 1.0] };
        assert_eq!(code.weights(), vec![0.5, 0.25, 0.125]);
        assert_eq!(code.decode(), 0.625);
    }

    #[test]
    fn encoder_scales_and_masks() {
        let x = ndarray::array![[0.0, 5.0], [2.0, 5.0], [1.0, 5.0]];
        let avail = ndarray::Array2::ones((3, 2));
        let enc = BinaryEncoder::fit(x.view(), avail.view(), 3).unwrap();
        assert_eq!(enc.hard_bits(&[2.0, 5.0]), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(enc.hard_bits(&[0.0, 7.0]), vec![0.0; 6]);
        assert_eq!(enc.corrupted_bits(&[2.0, 5.0], &[0.0, 1.0]), vec![0.5, 0.5, 0.5, 0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(levels in 1usize..12, frac in 0.0f64..1.0) {
            let v = frac * max_code_value(levels);
            let bits: Vec<f64> = encode_binary(v, levels).unwrap().into_iter().map(f64::from).collect();
            let back = decode_binary(&bits);
            prop_assert!((back - v).abs() <= 0.5f64.powi(levels as i32 + 1) + 1e-15);
            prop_assert!(back >= 0.0 && back <= max_code_value(levels));
        }
    }
}
