//! IBM System/360 hexadecimal floating point.
//!
//! Layout: sign bit, 7-bit exponent in excess-64 base 16, then a 56-bit
//! fraction, so the value is `±fraction / 16^14 × 16^(exp − 64)`.

/// A decoded numeric cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IbmValue {
    Number(f64),
    /// SAS missing value; the byte is `.`, `_` or `A`..=`Z`.
    Missing(u8),
}

impl IbmValue {
    pub fn number(self) -> Option<f64> {
        match self {
            IbmValue::Number(v) => Some(v),
            IbmValue::Missing(_) => None,
        }
    }
}

pub fn is_missing_tag(b: u8) -> bool {
    b == b'.' || b == b'_' || b.is_ascii_uppercase()
}

fn pow2(e: i32) -> f64 {
    // Every exponent reachable here is inside the normal range.
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Converts one 8-byte big-endian IBM double.
pub fn ibm_to_ieee(bytes: [u8; 8]) -> IbmValue {
    if is_missing_tag(bytes[0]) && bytes[1..].iter().all(|&b| b == 0) {
        return IbmValue::Missing(bytes[0]);
    }
    let negative = bytes[0] & 0x80 != 0;
    let exponent = i32::from(bytes[0] & 0x7f) - 64;
    let mut fraction = 0u64;
    for &b in &bytes[1..] {
        fraction = (fraction << 8) | u64::from(b);
    }
    // `as f64` rounds to nearest even; the power of two scales exactly.
    let magnitude = fraction as f64 * pow2(4 * (exponent - 14));
    IbmValue::Number(if negative { -magnitude } else { magnitude })
}

/// Converts a stored numeric of 2 to 8 bytes; short values are right-padded
/// with zero bytes.
pub fn ibm_to_ieee_truncated(bytes: &[u8]) -> IbmValue {
    let mut full = [0u8; 8];
    let n = bytes.len().min(8);
    full[..n].copy_from_slice(&bytes[..n]);
    ibm_to_ieee(full)
}

/// Inverse conversion for finite values inside the IBM range. Any f64
/// significand fits the 56-bit fraction, so this is exact.
pub fn ieee_to_ibm(value: f64) -> Option<[u8; 8]> {
    if !value.is_finite() {
        return None;
    }
    if value == 0.0 {
        let mut out = [0u8; 8];
        if value.is_sign_negative() {
            out[0] = 0x80;
        }
        return Some(out);
    }
    let bits = value.to_bits();
    let negative = bits >> 63 != 0;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let (m, e2) = if biased == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), biased - 1075)
    };
    let nb = 64 - m.leading_zeros() as i32;
    let s0 = 56 - nb;
    let s = s0 - (s0 - e2).rem_euclid(4);
    let fraction = m << s;
    let q = (e2 - s) / 4;
    let exp = q + 78;
    if !(0..=127).contains(&exp) {
        return None;
    }
    let mut out = [0u8; 8];
    out[0] = (exp as u8) | if negative { 0x80 } else { 0 };
    out[1..].copy_from_slice(&fraction.to_be_bytes()[1..]);
    Some(out)
}
