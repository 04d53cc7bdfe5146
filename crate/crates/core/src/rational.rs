//! Exact rational error rates.
//!
//! Every weight in this crate (satisfaction thresholds, atom weights,
//! derivation costs) is an exact rational in the closed interval [0, 1].
//! Arbitrary-precision integers back the arithmetic, so comparisons like
//! `deletions <= p * rows` never round.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Errors raised while constructing or parsing an [`ErrorRate`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RateError {
    #[error("denominator must be positive")]
    ZeroDenominator,
    #[error("rate {0} is outside [0, 1]")]
    OutOfRange(String),
    #[error("cannot parse rate from {0:?}")]
    Unparseable(String),
}

/// An exact rational in [0, 1], kept in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErrorRate(BigRational);

impl ErrorRate {
    pub fn zero() -> Self {
        ErrorRate(BigRational::zero())
    }

    pub fn one() -> Self {
        ErrorRate(BigRational::one())
    }

    /// Builds `numer/denom`, rejecting values outside [0, 1].
    pub fn new(numer: u64, denom: u64) -> Result<Self, RateError> {
        if denom == 0 {
            return Err(RateError::ZeroDenominator);
        }
        let r = BigRational::new(BigInt::from(numer), BigInt::from(denom));
        Self::from_ratio(r)
    }

    pub(crate) fn from_ratio(r: BigRational) -> Result<Self, RateError> {
        if r.is_negative() || r > BigRational::one() {
            return Err(RateError::OutOfRange(r.to_string()));
        }
        Ok(ErrorRate(r))
    }

    /// The fraction `count / total`; an empty total yields zero.
    pub fn fraction_of(count: usize, total: usize) -> Self {
        if total == 0 {
            return Self::zero();
        }
        let r = BigRational::new(BigInt::from(count), BigInt::from(total));
        ErrorRate(if r > BigRational::one() { BigRational::one() } else { r })
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// `self + other`, saturating at 1.
    pub fn saturating_add(&self, other: &ErrorRate) -> ErrorRate {
        let sum = &self.0 + &other.0;
        ErrorRate(if sum > BigRational::one() { BigRational::one() } else { sum })
    }

    /// Whether `self + other` stays within [0, 1] exactly.
    pub fn sum_in_range(&self, other: &ErrorRate) -> bool {
        &self.0 + &other.0 <= BigRational::one()
    }

    /// Exact sum, or `None` when it leaves [0, 1].
    pub fn checked_add(&self, other: &ErrorRate) -> Option<ErrorRate> {
        let sum = &self.0 + &other.0;
        (sum <= BigRational::one()).then_some(ErrorRate(sum))
    }

    /// Compares `count` against `self * total` without rounding.
    pub fn at_least_fraction(&self, count: usize, total: usize) -> bool {
        BigRational::from_integer(BigInt::from(count)) <= &self.0 * BigInt::from(total)
    }

    /// `self - other` clamped below at 0.
    pub fn saturating_sub(&self, other: &ErrorRate) -> ErrorRate {
        let diff = &self.0 - &other.0;
        ErrorRate(if diff.is_negative() { BigRational::zero() } else { diff })
    }

    /// Absolute difference `|self - other|`.
    pub fn abs_diff(&self, other: &ErrorRate) -> ErrorRate {
        ErrorRate((&self.0 - &other.0).abs())
    }

    /// `ceil(scale / self)` for positive rates, used to size row counts.
    pub fn ceil_inverse_scaled(&self, scale: u64) -> Option<u64> {
        if self.0.is_zero() {
            return None;
        }
        let q = BigRational::from_integer(BigInt::from(scale)) / &self.0;
        q.ceil().to_integer().to_u64()
    }

    /// `floor(self * n)` as an integer, used to place column breakpoints.
    pub fn floor_scaled(&self, n: u64) -> u64 {
        let prod = &self.0 * BigInt::from(n);
        prod.floor()
            .to_integer()
            .to_u64()
            .expect("rate in [0,1] scaled by u64 fits in u64")
    }

    /// Always-fractional rendering, e.g. `0/1`, `1/4`, `1/1`.
    pub fn as_fraction(&self) -> String {
        format!("{}/{}", self.0.numer(), self.0.denom())
    }

    /// Parses `a/b`, an integer literal, or a decimal literal such as `0.25`.
    pub fn parse(text: &str) -> Result<Self, RateError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(RateError::Unparseable(text.to_string()));
        }
        if let Some((n, d)) = text.split_once('/') {
            let numer = u64::from_str(n.trim())
                .map_err(|_| RateError::Unparseable(text.to_string()))?;
            let denom = u64::from_str(d.trim())
                .map_err(|_| RateError::Unparseable(text.to_string()))?;
            return Self::new(numer, denom);
        }
        if let Some((whole, frac)) = text.split_once('.') {
            let whole = if whole.is_empty() { "0" } else { whole };
            let whole = u64::from_str(whole)
                .map_err(|_| RateError::Unparseable(text.to_string()))?;
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(RateError::Unparseable(text.to_string()));
            }
            let digits = frac.len() as u32;
            let numer = u64::from_str(frac)
                .map_err(|_| RateError::Unparseable(text.to_string()))?;
            let denom = BigInt::from(10u32).pow(digits);
            let r = BigRational::from_integer(BigInt::from(whole))
                + BigRational::new(BigInt::from(numer), denom);
            return Self::from_ratio(r);
        }
        let whole = u64::from_str(text).map_err(|_| RateError::Unparseable(text.to_string()))?;
        Self::new(whole, 1)
    }
}

impl PartialOrd<BigRational> for ErrorRate {
    fn partial_cmp(&self, other: &BigRational) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl PartialEq<BigRational> for ErrorRate {
    fn eq(&self, other: &BigRational) -> bool {
        self.0 == *other
    }
}

impl fmt::Display for ErrorRate {
    /// Integer rendering when the rate is whole (`0`, `1`), else `a/b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl From<&ErrorRate> for BigRational {
    fn from(rate: &ErrorRate) -> BigRational {
        rate.0.clone()
    }
}
