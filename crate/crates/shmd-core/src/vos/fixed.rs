//! Fixed-point number format used by the hardware-style inference path.
//!
//! Values are signed two's-complement with a fixed binary point:
//! `total_bits` wide with `fractional_bits` below the point, so a raw
//! integer `r` represents `r / 2^fractional_bits`. Multiply-accumulate
//! runs in a wider `accumulator_bits` register, with products carrying
//! twice the fractional scale until the final per-layer rescale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default format: Q16.16 values in a 64-bit accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub fractional_bits: u32,
    pub accumulator_bits: u32,
}

impl Default for FixedPointFormat {
    fn default() -> Self {
        FixedPointFormat {
            total_bits: 32,
            fractional_bits: 16,
            accumulator_bits: 64,
        }
    }
}

impl FixedPointFormat {
    /// Grid step count per unit, i.e. 2^fractional_bits.
    pub fn scale(&self) -> f64 {
        (1u64 << self.fractional_bits) as f64
    }

    /// Largest representable value, (2^(total-1) - 1) / 2^frac.
    pub fn max_value(&self) -> f64 {
        i32::MAX as f64 / self.scale()
    }

    /// Most negative representable value, -2^(total-1) / 2^frac.
    pub fn min_value(&self) -> f64 {
        i32::MIN as f64 / self.scale()
    }

    /// The engine's integer kernels are written against i32 values and an
    /// i64 accumulator, so those widths are load-bearing; only the binary
    /// point position is genuinely adjustable.
    pub fn validate(&self) -> Result<()> {
        if self.total_bits != 32 {
            return Err(Error::Config(format!(
                "total_bits must be 32 (got {})",
                self.total_bits
            )));
        }
        if self.accumulator_bits != 64 {
            return Err(Error::Config(format!(
                "accumulator_bits must be 64 (got {})",
                self.accumulator_bits
            )));
        }
        if self.fractional_bits < 1 || self.fractional_bits > 30 {
            return Err(Error::Config(format!(
                "fractional_bits must be in 1..=30 (got {})",
                self.fractional_bits
            )));
        }
        Ok(())
    }

    /// Nearest raw integer for `v`, ties away from zero. None if the
    /// result would not fit in i32.
    pub fn checked_raw(&self, v: f64) -> Option<i32> {
        let scaled = (v * self.scale()).round();
        if scaled.is_finite() && scaled >= i32::MIN as f64 && scaled <= i32::MAX as f64 {
            Some(scaled as i32)
        } else {
            None
        }
    }

    /// Value represented by a raw integer.
    pub fn value_from_raw(&self, raw: i32) -> f64 {
        raw as f64 / self.scale()
    }

    /// Round `v` to the representation grid (no range check).
    pub fn quantize_value(&self, v: f64) -> f64 {
        (v * self.scale()).round() / self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_q16_16() {
        let f = FixedPointFormat::default();
        assert_eq!(f.scale(), 65536.0);
        f.validate().unwrap();
        assert!((f.max_value() - 32768.0).abs() < 1e-3);
        assert_eq!(f.min_value(), -32768.0);
    }

    #[test]
    fn raw_round_trip() {
        let f = FixedPointFormat::default();
        assert_eq!(f.checked_raw(1.0), Some(65536));
        assert_eq!(f.checked_raw(-0.5), Some(-32768));
        assert_eq!(f.value_from_raw(65536), 1.0);
        // Ties round away from zero in both directions.
        assert_eq!(f.checked_raw(0.5 / 65536.0), Some(1));
        assert_eq!(f.checked_raw(-0.5 / 65536.0), Some(-1));
        // Out of range.
        assert_eq!(f.checked_raw(40000.0), None);
        assert_eq!(f.checked_raw(f64::NAN), None);
    }

    #[test]
    fn quantize_value_lands_on_grid() {
        let f = FixedPointFormat::default();
        let q = f.quantize_value(0.1);
        assert_eq!(q, f.value_from_raw(f.checked_raw(0.1).unwrap()));
        assert!((q - 0.1).abs() <= 0.5 / 65536.0);
    }

    #[test]
    fn invalid_formats_are_rejected() {
        let mut f = FixedPointFormat::default();
        f.total_bits = 16;
        assert!(f.validate().is_err());
        let mut f = FixedPointFormat::default();
        f.fractional_bits = 0;
        assert!(f.validate().is_err());
        let mut f = FixedPointFormat::default();
        f.fractional_bits = 31;
        assert!(f.validate().is_err());
        let mut f = FixedPointFormat::default();
        f.accumulator_bits = 32;
        assert!(f.validate().is_err());
    }
}
