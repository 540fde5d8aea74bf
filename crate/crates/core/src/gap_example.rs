//! A countably-Markov lift whose preimage growth `5` exceeds the exponential
//! of its entropy `2 + 2√2`.
//!
//! The lift has turning points `z ↦ z − 1` and `z + 3/5 ↦ z + 2`, slope `±5`
//! everywhere. Its partition `ℤ ∪ (ℤ + 3/5)` gives the two-state-per-cell
//! graph `Γ`; the scalar band `Γ'` with `A'_{n,n-1} = 1`, `A'_{n,n} = 2`,
//! `A'_{n,n+1} = 2` counts the same paths cell by cell.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::Result;
use crate::markov_chain::{
    build_transition, convolution_identity_check, entropy_estimates, path_counts, CountMode, Estimator,
    MarkovSystem, State, TransitionStructure,
};
use crate::pwl_map::{preimage_count, PeriodicLift, PwlMap};
use crate::rational::{self, q, qi, Q};
use crate::subeigen::banded_perron;

/// Counts above this depth use scaled arithmetic in the entropy estimates.
const EXACT_ENTROPY_DEPTH: usize = 60;

/// Deepest preimage enumeration; `5^n` points are visited.
const PREIMAGE_DEPTH: usize = 6;

#[derive(Debug, Clone)]
pub struct GapExample {
    pub lift: PeriodicLift,
    pub system: MarkovSystem,
    pub gamma: TransitionStructure,
    pub gamma_prime: TransitionStructure,
}

pub fn gamma_prime() -> TransitionStructure {
    TransitionStructure::scalar_band(&[(-1, 1), (0, 2), (1, 2)]).expect("valid band")
}

pub fn build_example() -> Result<GapExample> {
    let lift = PeriodicLift::gap_example();
    let system = MarkovSystem::lift(lift.clone(), vec![qi(0), q(3, 5)])?;
    let gamma = build_transition(&system)?;
    Ok(GapExample {
        lift,
        system,
        gamma,
        gamma_prime: gamma_prime(),
    })
}

/// The generic point used for preimage counts: interior to `I_0 = (0, 3/5)`.
pub fn generic_point() -> Q {
    q(3, 10)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BridgeRow {
    pub n: usize,
    pub gamma_out: String,
    pub gamma_prime_out_twice: String,
    pub gamma_in: String,
    pub gamma_prime_in_twice: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BridgeReport {
    pub ok: bool,
    pub first_failure: Option<usize>,
    pub rows: Vec<BridgeRow>,
}

/// Checks `Σ_{x in cell 0} p^Γ_{x·}(n) = s · p^{Γ'}_{0·}(n)` and the same for
/// incoming paths, where `s` is the number of states per cell of `Γ`.
pub fn vertex_edge_count_bridge(
    gamma: &TransitionStructure,
    gamma_prime: &TransitionStructure,
    n_max: usize,
) -> Result<BridgeReport> {
    let s = gamma.states_per_cell();
    let zero = State::new(0, 0);
    let reference = path_counts(gamma_prime, &zero, &zero, n_max)?;
    let mut out = vec![BigUint::default(); n_max + 1];
    let mut inn = vec![BigUint::default(); n_max + 1];
    for k in 0..s {
        let x = State::new(0, k);
        let t = path_counts(gamma, &x, &x, n_max)?;
        for n in 0..=n_max {
            out[n] += &t.p_a_dot[n];
            inn[n] += &t.p_dot_b[n];
        }
    }
    let mut rows = Vec::with_capacity(n_max);
    let mut first_failure = None;
    for n in 1..=n_max {
        let out2 = &reference.p_a_dot[n] * s;
        let in2 = &reference.p_dot_b[n] * s;
        if (out[n] != out2 || inn[n] != in2) && first_failure.is_none() {
            first_failure = Some(n);
        }
        rows.push(BridgeRow {
            n,
            gamma_out: out[n].to_string(),
            gamma_prime_out_twice: out2.to_string(),
            gamma_in: inn[n].to_string(),
            gamma_prime_in_twice: in2.to_string(),
        });
    }
    Ok(BridgeReport {
        ok: first_failure.is_none(),
        first_failure,
        rows,
    })
}

/// One row of the plotting table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub p00: String,
    pub p_dot0: String,
    /// `p00^(n) / p00^(n-1)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// Last reverse Salama ratio estimate on `Γ'`.
    pub revsalama_estimate: f64,
    /// Last Gurevich ratio estimate on `Γ'`.
    pub gurevich_estimate: f64,
    pub perron_threshold: f64,
    /// `revsalama_estimate − log perron_threshold`.
    pub gap_margin: f64,
    #[serde(with = "rational::serde_q")]
    pub lift_lipschitz: Q,
    /// `#F^{-n}(3/10)` for `n = 1..`.
    pub preimage_counts: Vec<u128>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub rows: Vec<CountRow>,
}

/// Relative tolerance on `exp(gurevich estimate)` against the threshold.
pub const GUREVICH_REL_TOL: f64 = 0.01;

pub fn run_gap_pipeline(n_counts: usize, n_entropy: usize) -> Result<GapReport> {
    let ex = build_example()?;
    let zero = State::new(0, 0);
    let mut checks = Vec::new();

    let counts = path_counts(&ex.gamma_prime, &zero, &zero, n_counts)?;
    let powers_ok = counts
        .p_dot_b
        .iter()
        .enumerate()
        .all(|(n, c)| *c == BigUint::from(5u32).pow(n as u32));
    checks.push(Check {
        name: "columns_are_powers_of_five",
        pass: powers_ok,
        detail: format!("p_·0^(n) = 5^n for n <= {n_counts}"),
    });

    let x = generic_point();
    let depth = n_counts.min(PREIMAGE_DEPTH);
    let gamma_in = path_counts(&ex.gamma, &zero, &zero, depth)?.p_dot_b;
    let mut preimage_counts = Vec::with_capacity(depth);
    let mut bridge_ok = true;
    for (n, incoming) in gamma_in.iter().enumerate().skip(1) {
        let c = preimage_count(&ex.lift, &x, n, None)?;
        bridge_ok &= incoming.to_u128() == Some(c) && c == 5u128.pow(n as u32);
        preimage_counts.push(c);
    }
    checks.push(Check {
        name: "preimages_match_incoming_paths",
        pass: bridge_ok,
        detail: format!("#F^-n({x}) = p_·I0^(n) = 5^n for n <= {depth}"),
    });

    let bridge = vertex_edge_count_bridge(&ex.gamma, &ex.gamma_prime, n_counts)?;
    checks.push(Check {
        name: "vertex_edge_bridge",
        pass: bridge.ok,
        detail: match bridge.first_failure {
            Some(n) => format!("first failure at n = {n}"),
            None => format!("exact for n <= {n_counts}"),
        },
    });

    let conv = convolution_identity_check(&ex.gamma_prime, &zero, n_counts)?;
    checks.push(Check {
        name: "convolution_identity",
        pass: conv.ok,
        detail: format!("first failure: {:?}", conv.first_failure),
    });

    let mode = if n_entropy <= EXACT_ENTROPY_DEPTH {
        CountMode::Exact
    } else {
        CountMode::Scaled
    };
    let est = entropy_estimates(&ex.gamma_prime, &zero, n_entropy, Estimator::Ratio, mode)?;
    let coeffs: BTreeMap<i64, f64> = [(-1, 1.0), (0, 2.0), (1, 2.0)].into();
    let perron = banded_perron(&coeffs, None, 1e-13)?;
    let expected = 2.0 + 2.0 * 2f64.sqrt();
    checks.push(Check {
        name: "perron_threshold",
        pass: (perron.threshold - expected).abs() < 1e-9,
        detail: format!("threshold {:.12} vs 2+2√2", perron.threshold),
    });
    let ratio = est.last.gurevich.exp();
    checks.push(Check {
        name: "gurevich_estimate",
        pass: (ratio / perron.threshold - 1.0).abs() < GUREVICH_REL_TOL,
        detail: format!("exp estimate {ratio:.6} at n = {n_entropy}"),
    });
    checks.push(Check {
        name: "revsalama_is_log_five",
        pass: (est.last.revsalama - 5f64.ln()).abs() < 1e-12,
        detail: format!("estimate {:.15}", est.last.revsalama),
    });
    let lift_lipschitz = ex.lift.lipschitz_constant();
    checks.push(Check {
        name: "lift_lipschitz_is_five",
        pass: lift_lipschitz == qi(5),
        detail: format!("Lip F = {lift_lipschitz}"),
    });
    let gap_margin = est.last.revsalama - perron.threshold.ln();
    checks.push(Check {
        name: "gap",
        pass: gap_margin > 0.0,
        detail: format!("log 5 − log λ* = {gap_margin:.6}"),
    });

    let rows = (1..=n_counts)
        .map(|n| CountRow {
            n,
            p00: counts.p_ab[n].to_string(),
            p_dot0: counts.p_dot_b[n].to_string(),
            ratio: ratio_of(&counts.p_ab[n], &counts.p_ab[n - 1]),
        })
        .collect();

    Ok(GapReport {
        revsalama_estimate: est.last.revsalama,
        gurevich_estimate: est.last.gurevich,
        perron_threshold: perron.threshold,
        gap_margin,
        lift_lipschitz,
        preimage_counts,
        pass: checks.iter().all(|c| c.pass),
        checks,
        rows,
    })
}

fn ratio_of(a: &BigUint, b: &BigUint) -> f64 {
    let (la, lb) = (
        rational::ln_bigint(&a.clone().into()),
        rational::ln_bigint(&b.clone().into()),
    );
    (la - lb).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    #[serde(with = "rational::serde_q")]
    pub x: Q,
    pub count: u128,
    /// `(1/n) log #f^{-n}(x)`.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TentReport {
    pub n: usize,
    pub rows: Vec<GrowthRow>,
    /// Every growth estimate within `rel_tol` of `log 2`.
    pub pass: bool,
    pub rel_tol: f64,
}

/// Preimage growth of the full tent map, a finite-partition contrast to the lift.
pub fn tent_preimage_growth(n: usize, points: &[Q], rel_tol: f64) -> Result<TentReport> {
    let tent = PwlMap::tent();
    let mut rows = Vec::with_capacity(points.len());
    for x in points {
        let count = preimage_count(&tent, x, n, None)?;
        let growth = (count as f64).ln() / n as f64;
        rows.push(GrowthRow {
            x: x.clone(),
            count,
            growth,
        });
    }
    let pass = rows.iter().all(|r| (r.growth / 2f64.ln() - 1.0).abs() <= rel_tol);
    Ok(TentReport { n, rows, pass, rel_tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    #[test]
    fn example_structures() {
        let ex = build_example().unwrap();
        assert_eq!(ex.lift.lipschitz_constant(), qi(5));
        for i in 0..2 {
            let ((x0, y0), (x1, y1)) = ex.lift.segment(0, i);
            assert_eq!(((y1 - y0) / (x1 - x0)).abs(), qi(5));
        }
        let deg = |ts: &TransitionStructure, s: State| ts.successors(&s).iter().map(|(_, a)| a).sum::<u64>();
        assert_eq!(deg(&ex.gamma, State::new(0, 0)), 6);
        assert_eq!(deg(&ex.gamma, State::new(0, 1)), 4);
        assert_eq!(deg(&ex.gamma_prime, State::new(0, 0)), 5);
    }

    #[test]
    fn bridge_by_hand_and_to_twenty() {
        let ex = build_example().unwrap();
        let r = vertex_edge_count_bridge(&ex.gamma, &ex.gamma_prime, 20).unwrap();
        assert!(r.ok);
        assert_eq!(r.rows[0].gamma_out, "10");
        assert_eq!(r.rows[1].gamma_out, "50");
    }

    #[test]
    fn pipeline_passes() {
        let r = run_gap_pipeline(12, 200).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert_eq!(r.preimage_counts, vec![5, 25, 125, 625, 3125, 15625]);
        assert!((r.revsalama_estimate - 1.60944).abs() < 1e-5);
        assert!((r.gap_margin - 0.0349).abs() < 1e-3);
        assert_eq!(r.rows[3].p00, "136");
    }

    #[test]
    fn tent_growth_is_log_two() {
        let r = tent_preimage_growth(12, &[q(1, 3), q(1, 2), q(2, 3)], 0.05).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.count == 1 << 12));
    }
}
