//! 16-bit fixed-point arithmetic.
//!
//! Activations and weights are signed 16-bit values whose binary point sits at a
//! per-layer [`QFormat`]. Products accumulate into 32-bit saturating registers
//! whose fractional width is the sum of the operand widths.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Position of the binary point in a 16-bit signed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QFormat {
    frac_bits: u8,
}

impl QFormat {
    pub const MAX_FRAC_BITS: u8 = 15;

    pub fn new(frac_bits: u8) -> Result<Self> {
        if frac_bits > Self::MAX_FRAC_BITS {
            return Err(Error::InvalidQFormat(frac_bits as u32));
        }
        Ok(Self { frac_bits })
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    /// Real value of one least-significant bit.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }
}

impl Default for QFormat {
    fn default() -> Self {
        Self { frac_bits: 8 }
    }
}

impl TryFrom<u8> for QFormat {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        QFormat::new(v)
    }
}

impl From<QFormat> for u8 {
    fn from(q: QFormat) -> u8 {
        q.frac_bits
    }
}

/// 16-bit activation or weight. The Q format lives with the owning tensor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fx16(pub i16);

/// 32-bit accumulator register.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fx32(pub i32);

impl Fx16 {
    pub const ZERO: Fx16 = Fx16(0);

    pub fn raw(self) -> i16 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn to_f64(self, q: QFormat) -> f64 {
        self.0 as f64 * q.resolution()
    }
}

impl Fx32 {
    pub const ZERO: Fx32 = Fx32(0);

    pub fn raw(self) -> i32 {
        self.0
    }

    pub fn saturating_add(self, other: Fx32) -> Fx32 {
        Fx32(self.0.saturating_add(other.0))
    }
}

fn saturate_i16(v: i64) -> i16 {
    v.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

fn saturate_i32(v: i64) -> i32 {
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

/// Round-to-nearest-even of `x * 2^frac`, saturated to 16 bits.
pub fn quantize(x: f64, q: QFormat) -> Result<Fx16> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let scaled = (x * (q.frac_bits as f64).exp2()).round_ties_even();
    let clamped = scaled.clamp(i16::MIN as f64, i16::MAX as f64);
    Ok(Fx16(clamped as i16))
}

/// One multiply-accumulate step: `acc + a * b`, saturating at the 32-bit bounds.
#[inline]
pub fn mac(acc: Fx32, a: Fx16, b: Fx16) -> Fx32 {
    let prod = a.0 as i64 * b.0 as i64;
    Fx32(saturate_i32(acc.0 as i64 + prod))
}

/// Arithmetic shift of `v` right by `shift` bits, rounding to nearest even.
pub(crate) fn shift_right_rne(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        return v;
    }
    if shift >= 63 {
        return 0;
    }
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

/// Moves an accumulator with `in_frac` fractional bits into `out_q`.
pub fn requantize(acc: Fx32, in_frac: u32, out_q: QFormat) -> Fx16 {
    let out_frac = out_q.frac_bits as u32;
    let v = acc.0 as i64;
    let shifted = if in_frac >= out_frac {
        shift_right_rne(v, in_frac - out_frac)
    } else {
        let left = out_frac - in_frac;
        // |v| < 2^31 and left <= 15 so this cannot overflow an i64.
        v << left
    };
    Fx16(saturate_i16(shifted))
}

#[inline]
pub fn relu16(x: Fx16) -> Fx16 {
    Fx16(x.0.max(0))
}
