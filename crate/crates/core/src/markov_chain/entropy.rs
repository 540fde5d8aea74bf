use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::{path_counts, scaled_log_counts, State, TransitionStructure};
use crate::error::{Error, Result};
use crate::rational::ln_bigint;

/// How a growth rate is read off a count sequence `p^(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// `(1/n) log p^(n)`.
    Root,
    /// `log p^(n) − log p^(n−1)`.
    #[default]
    Ratio,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(Estimator::Root),
            "ratio" => Ok(Estimator::Ratio),
            _ => Err(Error::invalid(format!("unknown estimator {s:?} (root|ratio)"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Root => "root",
            Estimator::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Big-integer counts.
    #[default]
    Exact,
    /// Renormalized floating point with an accumulated log scale.
    Scaled,
}

impl FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CountMode::Exact),
            "scaled" => Ok(CountMode::Scaled),
            _ => Err(Error::invalid(format!("unknown count mode {s:?} (exact|scaled)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyTriple {
    pub gurevich: f64,
    pub salama: f64,
    pub revsalama: f64,
}

/// Estimates of the Gurevich (`p_aa`), Salama (`p_a·`) and reverse Salama
/// (`p_·a`) entropies for `n = 1..=n_max`.
///
/// These are finite-`n` estimates of a limsup; nothing here certifies
/// convergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimates {
    pub anchor: String,
    pub estimator: Estimator,
    pub mode: CountMode,
    pub gurevich: Vec<f64>,
    pub salama: Vec<f64>,
    pub revsalama: Vec<f64>,
    pub last: EntropyTriple,
    /// `exp(last)`: growth rates of the three counts.
    pub growth: EntropyTriple,
}

pub fn entropy_estimates(
    ts: &TransitionStructure,
    a: &State,
    n_max: usize,
    estimator: Estimator,
    mode: CountMode,
) -> Result<EntropyEstimates> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let (loops, out, inn) = match mode {
        CountMode::Exact => {
            let t = path_counts(ts, a, a, n_max)?;
            let logs = |xs: &[num_bigint::BigUint]| -> Vec<f64> {
                xs.iter().map(|x| ln_bigint(&BigInt::from(x.clone()))).collect()
            };
            (logs(&t.p_ab), logs(&t.p_a_dot), logs(&t.p_dot_b))
        }
        CountMode::Scaled => {
            let s = scaled_log_counts(ts, a, a, n_max)?;
            (s.log_p_ab, s.log_p_a_dot, s.log_p_dot_b)
        }
    };
    let gurevich = estimate(&loops, estimator, "p_aa")?;
    let salama = estimate(&out, estimator, "p_a·")?;
    let revsalama = estimate(&inn, estimator, "p_·a")?;
    let last = EntropyTriple {
        gurevich: *gurevich.last().unwrap(),
        salama: *salama.last().unwrap(),
        revsalama: *revsalama.last().unwrap(),
    };
    let growth = EntropyTriple {
        gurevich: last.gurevich.exp(),
        salama: last.salama.exp(),
        revsalama: last.revsalama.exp(),
    };
    Ok(EntropyEstimates {
        anchor: ts.label(a),
        estimator,
        mode,
        gurevich,
        salama,
        revsalama,
        last,
        growth,
    })
}

/// `logs[n]` is `log p^(n)` with `logs[0] = 0`.
fn estimate(logs: &[f64], estimator: Estimator, kind: &'static str) -> Result<Vec<f64>> {
    if let Some(n) = (1..logs.len()).find(|&n| !logs[n].is_finite()) {
        return Err(Error::ZeroCount { kind, n });
    }
    Ok((1..logs.len())
        .map(|n| match estimator {
            Estimator::Root => logs[n] / n as f64,
            Estimator::Ratio => logs[n] - logs[n - 1],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_prime() -> TransitionStructure {
        TransitionStructure::scalar_band(&[(-1, 1), (0, 2), (1, 2)]).unwrap()
    }

    #[test]
    fn revsalama_is_log_five_from_the_start() {
        let e = entropy_estimates(&gamma_prime(), &State::new(0, 0), 20, Estimator::Ratio, CountMode::Exact).unwrap();
        for r in &e.revsalama {
            assert!((r - 5f64.ln()).abs() < 1e-12);
        }
        for (g, r) in e.gurevich.iter().zip(&e.revsalama) {
            assert!(r >= g);
        }
    }

    #[test]
    fn full_shift_all_log_two() {
        let ts = TransitionStructure::full_shift(2);
        let e = entropy_estimates(&ts, &State::finite(0), 10, Estimator::Ratio, CountMode::Exact).unwrap();
        for n in 2..=10 {
            for seq in [&e.gurevich, &e.salama, &e.revsalama] {
                assert!((seq[n - 1] - 2f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gurevich_ratio_approaches_perron_value() {
        let target = (2.0 + 2.0 * 2f64.sqrt()).ln();
        let e = entropy_estimates(&gamma_prime(), &State::new(0, 0), 400, Estimator::Ratio, CountMode::Scaled).unwrap();
        assert!((e.last.gurevich.exp() / target.exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn periodic_anchor_reports_zero_count() {
        let ts = TransitionStructure::from_matrix(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let err = entropy_estimates(&ts, &State::finite(0), 4, Estimator::Root, CountMode::Exact).unwrap_err();
        assert!(matches!(err, Error::ZeroCount { kind: "p_aa", n: 1 }));
    }
}
