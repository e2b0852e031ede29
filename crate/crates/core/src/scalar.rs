//! Scalar abstractions.
//!
//! Amplitudes are generic over [`Real`] (`f32` or `f64`); probabilities, correlations
//! and success rates are generic over [`Probability`], which is also implemented by the
//! exact [`Rational`] type used wherever a bias is too small for floating point.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FloatConst, One, Signed, ToPrimitive, Zero};

use crate::error::{NofError, Result};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

/// Floating point type used for amplitudes.
pub trait Real: num_traits::Float + FloatConst + Default + Debug + Display + Send + Sync + 'static {
    /// Absolute tolerance for normalization, orthonormality and PSD checks.
    const TOLERANCE: Self;

    fn from_f64(value: f64) -> Self;
}

impl Real for f64 {
    const TOLERANCE: Self = 1e-9;

    fn from_f64(value: f64) -> Self {
        value
    }
}

impl Real for f32 {
    const TOLERANCE: Self = 1e-5;

    fn from_f64(value: f64) -> Self {
        value as f32
    }
}

/// A probability-like scalar: exact rationals or floats.
pub trait Probability:
    Clone + PartialOrd + Debug + Display + num_traits::Num + Signed + Send + Sync
{
    fn from_ratio(numerator: i64, denominator: u64) -> Self;

    fn as_f64(&self) -> f64;

    /// `numerator / 2^log2_denominator`.
    fn dyadic(numerator: i64, log2_denominator: u32) -> Self {
        let mut value = Self::from_ratio(numerator, 1);
        let two = Self::from_ratio(2, 1);
        for _ in 0..log2_denominator {
            value = value / two.clone();
        }
        value
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
}

impl Probability for f64 {
    fn from_ratio(numerator: i64, denominator: u64) -> Self {
        numerator as f64 / denominator as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Probability for f32 {
    fn from_ratio(numerator: i64, denominator: u64) -> Self {
        (numerator as f64 / denominator as f64) as f32
    }

    fn as_f64(&self) -> f64 {
        *self as f64
    }
}

impl Probability for Rational {
    fn from_ratio(numerator: i64, denominator: u64) -> Self {
        Rational::new(BigInt::from(numerator), BigInt::from(denominator))
    }

    fn as_f64(&self) -> f64 {
        // numer/denom may overflow f64 individually; scale through the ratio.
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.denom().bits().saturating_sub(60);
                let n = (self.numer() >> shift).to_f64().unwrap_or(f64::NAN);
                let d = (self.denom() >> shift).to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    fn dyadic(numerator: i64, log2_denominator: u32) -> Self {
        Rational::new(BigInt::from(numerator), BigInt::one() << log2_denominator)
    }
}

/// Recover the exact dyadic rational `m / 2^bits` closest to `value`, failing when the
/// float is further than `1e-9` from that grid point.
pub fn dyadic_from_f64(value: f64, bits: u32) -> Result<Rational> {
    let scale = (bits as f64).exp2();
    let numerator = (value * scale).round();
    if (numerator / scale - value).abs() > 1e-9 || !numerator.is_finite() {
        return Err(NofError::NotDyadic { value, bits });
    }
    Ok(Rational::new(
        BigInt::from(numerator as i64),
        BigInt::one() << bits,
    ))
}

/// Render a rational as a reduced `p/q` string (`p` alone when `q = 1`).
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Parse `p/q` or `p` into a rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let parse_int = |s: &str| {
        s.trim()
            .parse::<BigInt>()
            .map_err(|e| NofError::Parse(format!("bad rational `{text}`: {e}")))
    };
    match text.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(NofError::Parse(format!("zero denominator in `{text}`")));
            }
            Ok(Rational::new(parse_int(n)?, d))
        }
        None => Ok(Rational::from_integer(parse_int(text)?)),
    }
}

/// Convert an exact probability to a float amplitude-ready value.
pub fn rational_to_real<T: Real>(value: &Rational) -> T {
    T::from_f64(value.as_f64())
}
