//! Exact rational scalars and their text form.
//!
//! All covariance calculus in this crate runs on arbitrary-precision
//! rationals. On the wire (JSON, CSV headers, CLI output) a rational is a
//! string `"p/q"`, an integer string, or a decimal such as `"0.3"`, which is
//! read as the exact fraction 3/10. JSON numbers are accepted too: integers
//! exactly, floats through their shortest decimal representation (a warning
//! is emitted by the CLI, since the caller may have meant a binary float).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Crate-wide exact scalar.
pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational `n/d`.
pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Lossless f64 view, for samplers and float-mode solvers.
pub fn to_f64(x: &Rat) -> f64 {
    x.to_f64().expect("rational out of f64 range")
}

/// Formats as `p/q`, or just `p` for integers.
pub fn format_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"p/q"`, an integer string, or a decimal such as `"-1.25"`.
pub fn parse_rat(s: &str) -> Result<Rat, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse rational from {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.trim_start().starts_with('-');
        let i: BigInt = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let f: BigInt = frac_part.parse().map_err(|_| bad())?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = BigRational::new(f, scale);
        let int = BigRational::from_integer(i);
        return Ok(if negative { int - frac } else { int + frac });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Reads a JSON value holding a rational in any accepted form.
///
/// Returns the value plus a flag saying whether a float-typed JSON number was
/// coerced through its decimal rendering.
pub fn rat_from_json(v: &serde_json::Value) -> Result<(Rat, bool), Error> {
    match v {
        serde_json::Value::String(s) => Ok((parse_rat(s)?, false)),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok((rat_int(i), false))
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| Error::Parse(format!("unrepresentable number {n}")))?;
                if !f.is_finite() {
                    return Err(Error::Parse(format!("non-finite number {n}")));
                }
                Ok((parse_rat(&format!("{f}"))?, true))
            }
        }
        other => Err(Error::Parse(format!("expected rational, got {other}"))),
    }
}

/// Nearest integer, halves rounding away from zero.
pub fn round_to_int(x: &Rat) -> BigInt {
    let half = BigRational::new(x.numer().signum(), BigInt::from(2));
    (x + half).floor().to_integer()
}

/// Nonnegative integer value of an exact-integer rational, if it is one.
pub fn as_u64(x: &Rat) -> Option<u64> {
    if x.denom().is_one() && !x.is_negative() {
        x.numer().to_u64()
    } else {
        None
    }
}
