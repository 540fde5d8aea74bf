use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form maps evaluated in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "snake_case")]
pub enum AnalyticMap {
    /// `x ↦ x^t`.
    Power(f64),
    /// `x ↦ exp(-(ln 1/x)^{log₂ t})`, extended by continuity with `0 ↦ 0`, `1 ↦ 1`.
    ///
    /// Conjugates `x²` to `x^t`.
    PsiT(f64),
}

impl AnalyticMap {
    pub fn power(t: f64) -> Result<Self> {
        check_exponent(t)?;
        Ok(AnalyticMap::Power(t))
    }

    pub fn psi_t(t: f64) -> Result<Self> {
        check_exponent(t)?;
        Ok(AnalyticMap::PsiT(t))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain {
                x: x.to_string(),
                domain: "[0,1]".into(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            AnalyticMap::Power(t) => x.powf(t),
            AnalyticMap::PsiT(t) => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    let l = (1.0 / x).ln();
                    (-l.powf(t.log2())).exp()
                }
            }
        }
    }
}

fn check_exponent(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("exponent must be positive, got {t}")))
    }
}

impl fmt::Display for AnalyticMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticMap::Power(t) => write!(f, "power:{t}"),
            AnalyticMap::PsiT(t) => write!(f, "psi:{t}"),
        }
    }
}

/// Parses `power:<t>` or `psi:<t>`.
impl FromStr for AnalyticMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, t) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected kind:t, got {s:?}")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad exponent in {s:?}")))?;
        match kind.trim() {
            "power" => AnalyticMap::power(t),
            "psi" | "psi_t" => AnalyticMap::psi_t(t),
            other => Err(Error::invalid(format!("unknown analytic map {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_half() {
        assert_eq!(AnalyticMap::power(2.0).unwrap().eval(0.5).unwrap(), 0.25);
    }

    #[test]
    fn psi_endpoints_by_continuity() {
        let psi = AnalyticMap::psi_t(4.0).unwrap();
        assert_eq!(psi.eval(0.0).unwrap(), 0.0);
        assert_eq!(psi.eval(1.0).unwrap(), 1.0);
        assert!(psi.eval(1e-300).unwrap() < 1e-100);
    }

    #[test]
    fn psi_is_increasing() {
        let psi = AnalyticMap::psi_t(3.0).unwrap();
        let mut prev = 0.0;
        for k in 1..100 {
            let v = psi.eval(k as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_nonpositive_exponent() {
        assert!(AnalyticMap::power(0.0).is_err());
        assert!(AnalyticMap::psi_t(-1.0).is_err());
        assert!("power:-2".parse::<AnalyticMap>().is_err());
        assert!(AnalyticMap::power(2.0).unwrap().eval(1.5).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        let m: AnalyticMap = "psi:4".parse().unwrap();
        assert_eq!(m, AnalyticMap::PsiT(4.0));
        assert_eq!(m.to_string().parse::<AnalyticMap>().unwrap(), m);
    }
}
