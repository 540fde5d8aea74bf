//! Exact rational helpers shared by every module.
//!
//! Values are [`num_rational::BigRational`]; on the wire they are `"p/q"`
//! strings (or plain integers), never floats.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

/// Exact rational number used throughout the crate.
pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse rational from {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"`, `"p"`, or a finite decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let t = s.trim();
    if let Ok(q) = BigRational::from_str(t) {
        return Ok(q);
    }
    parse_decimal(t).ok_or_else(|| ParseRationalError(s.to_string()))
}

fn parse_decimal(t: &str) -> Option<Q> {
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let q = BigRational::new(numer, denom);
    Some(if neg { -q } else { q })
}

/// Canonical `"p/q"` string (or `"p"` when the denominator is one).
pub fn fmt_q(q: &Q) -> String {
    q.to_string()
}

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Both parts overflow f64; divide in log space.
        let num = x.numer().abs();
        let den = x.denom();
        let ln = ln_bigint(&num) - ln_bigint(den);
        let v = ln.exp();
        if x.is_negative() {
            -v
        } else {
            v
        }
    })
}

/// Natural log of a positive big integer, valid far beyond the f64 range.
pub fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Nearest rational to a finite float, exact in binary.
pub fn from_f64(x: f64) -> Option<Q> {
    BigRational::from_float(x)
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

pub fn is_unit_interval(x: &Q) -> bool {
    !x.is_negative() && *x <= Q::one()
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Exact integer power with a possibly negative exponent.
pub fn powi(x: &Q, n: i32) -> Q {
    if n >= 0 {
        num_traits::pow(x.clone(), n as usize)
    } else {
        num_traits::pow(x.recip(), (-n) as usize)
    }
}

/// serde adapter: one rational as a `"p/q"` string.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let raw = String::deserialize(d)?;
        parse_q(&raw).map_err(serde::de::Error::custom)
    }
}

/// serde adapter: a list of rationals as `"p/q"` strings.
pub mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|r| parse_q(r).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// serde adapter: a list of rational pairs as `[["p/q","p/q"], ...]`.
pub mod serde_q_pairs {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[(Q, Q)], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for (a, b) in xs {
            seq.serialize_element(&[fmt_q(a), fmt_q(b)])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Q, Q)>, D::Error> {
        let raw = Vec::<[String; 2]>::deserialize(d)?;
        raw.iter()
            .map(|[a, b]| {
                Ok((
                    parse_q(a).map_err(serde::de::Error::custom)?,
                    parse_q(b).map_err(serde::de::Error::custom)?,
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse_q("3/5").unwrap(), q(3, 5));
        assert_eq!(parse_q("-1").unwrap(), qi(-1));
        assert_eq!(parse_q("6/4").unwrap(), q(3, 2));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-.5").unwrap(), q(-1, 2));
        assert!(parse_q("abc").is_err());
        assert!(parse_q("1/0").is_err());
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(fmt_q(&q(2, 4)), "1/2");
        assert_eq!(fmt_q(&q(4, 2)), "2");
        assert_eq!(fmt_q(&q(-3, 9)), "-1/3");
    }

    #[test]
    fn huge_ratio_to_float() {
        let big = num_traits::pow(BigInt::from(5u32), 2000);
        let x = BigRational::new(big.clone() * 3, big);
        assert!((to_f64(&x) - 3.0).abs() < 1e-12);
        let ln = ln_bigint(&num_traits::pow(BigInt::from(5u32), 400));
        assert!((ln - 400.0 * 5f64.ln()).abs() < 1e-9);
    }
}
