//! Low-precision float baselines: an unsigned 8-bit minifloat and bfloat16.

use half::bf16;

use crate::error::{Error, Result};
use crate::simplex::ProbVector;

/// Exponent bias of the 8-bit format; 1.0 is code `11 << 4`.
pub const MINIFLOAT_BIAS: i32 = 11;
const MINIFLOAT_ONE: u8 = (MINIFLOAT_BIAS as u8) << 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatFormat {
    /// No sign bit, 4 exponent bits, 4 mantissa bits, subnormals.
    Minifloat8,
    Bfloat16,
}

impl FloatFormat {
    pub fn bits(self) -> u32 {
        match self {
            FloatFormat::Minifloat8 => 8,
            FloatFormat::Bfloat16 => 16,
        }
    }

    /// The format with the given width, if any.
    pub fn for_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(FloatFormat::Minifloat8),
            16 => Some(FloatFormat::Bfloat16),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FloatFormat::Minifloat8 => "minifloat8",
            FloatFormat::Bfloat16 => "bfloat16",
        }
    }

    /// Value of a code word.
    pub fn decode(self, code: u16) -> f64 {
        match self {
            FloatFormat::Minifloat8 => minifloat_value(code as u8),
            FloatFormat::Bfloat16 => bf16::from_bits(code).to_f64(),
        }
    }

    /// Nearest code (ties to even); positive inputs below the smallest positive
    /// value saturate to it, so only an exact 0 encodes to 0.
    pub fn encode(self, x: f64) -> Result<u16> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("cannot round {x}: outside [0,1]")));
        }
        if x == 0.0 {
            return Ok(0);
        }
        let code = match self {
            FloatFormat::Minifloat8 => minifloat_encode(x) as u16,
            FloatFormat::Bfloat16 => bf16::from_f64(x).to_bits(),
        };
        Ok(code.max(1))
    }

    pub fn roundtrip(self, x: f64) -> Result<f64> {
        Ok(self.decode(self.encode(x)?))
    }

    /// Rounds every entry then renormalizes.
    pub fn quantize_vector(self, x: &ProbVector) -> Result<(Vec<f64>, ProbVector)> {
        let raw: Vec<f64> = x
            .as_slice()
            .iter()
            .map(|&v| self.roundtrip(v))
            .collect::<Result<_>>()?;
        let sum: f64 = raw.iter().sum();
        let z = ProbVector::new(raw.iter().map(|y| y / sum).collect())?;
        Ok((raw, z))
    }
}

fn minifloat_value(code: u8) -> f64 {
    let e = (code >> 4) as i32;
    let m = (code & 0x0f) as f64;
    if e == 0 {
        m / 16.0 * 2f64.powi(1 - MINIFLOAT_BIAS)
    } else {
        (1.0 + m / 16.0) * 2f64.powi(e - MINIFLOAT_BIAS)
    }
}

fn minifloat_encode(x: f64) -> u8 {
    // codes 0..=MINIFLOAT_ONE are increasing in value
    let (mut lo, mut hi) = (0u8, MINIFLOAT_ONE);
    if x >= 1.0 {
        return MINIFLOAT_ONE;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if minifloat_value(mid) <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dl = x - minifloat_value(lo);
    let dh = minifloat_value(hi) - x;
    if dl < dh || (dl == dh && lo % 2 == 0) {
        lo
    } else {
        hi
    }
}
