//! Rational helpers shared by every module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse {0:?} as a rational number")]
pub struct ParseRationalError(pub String);

/// Builds `num / den`. Panics when `den` is zero.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"p"`, `"p/q"` or a plain decimal such as `"0.75"`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = whole.starts_with('-');
        let whole_abs = whole.trim_start_matches(['-', '+']);
        let whole_val: BigInt = if whole_abs.is_empty() {
            BigInt::zero()
        } else {
            whole_abs.parse().map_err(|_| err())?
        };
        let frac_val: BigInt = frac.parse().map_err(|_| err())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::new(whole_val * &scale + frac_val, scale);
        return Ok(if negative { -mag } else { mag });
    }
    t.parse::<BigInt>()
        .map(Rational::from_integer)
        .map_err(|_| err())
}

/// Formats as `"p/q"`, or a bare integer when the denominator is one.
pub fn fmt_rational(r: &Rational) -> String {
    r.to_string()
}

pub fn sum<'a, I: IntoIterator<Item = &'a Rational>>(items: I) -> Rational {
    items.into_iter().fold(Rational::zero(), |acc, v| acc + v)
}

pub fn max_abs<'a, I: IntoIterator<Item = &'a Rational>>(items: I) -> Rational {
    items
        .into_iter()
        .map(|v| v.abs())
        .fold(Rational::zero(), |a, b| if b > a { b } else { a })
}
