//! λ-subeigenvectors: verification, the series construction from path
//! counts, summability, and the threshold of scalar banded structures.

use std::collections::BTreeMap;

use log::warn;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::markov_chain::{path_counts, scaled_log_counts, taboo_series, State, TransitionStructure};
use crate::rational::{self, ln_bigint, to_f64, Q};

/// Depth up to which count sequences are always taken from exact counts.
const EXACT_DEPTH: usize = 60;

/// Finite truncation parameters of a constructed vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub series_depth: usize,
    pub window_radius: usize,
}

/// Positive vector on a finite set of states with its subeigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SubeigenVector {
    pub lambda: Q,
    pub entries: BTreeMap<State, Q>,
    /// States `i` with `(Av)_i < λ v_i`, as found by the last verification.
    pub deficiency: Vec<State>,
    pub truncation: Option<Truncation>,
    /// Estimated relative size of the discarded series tail.
    pub tail_estimate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubeigenJson {
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_exact: Option<String>,
    entries: BTreeMap<State, f64>,
    #[serde(default)]
    deficiency: Vec<State>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<Truncation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_estimate: Option<f64>,
}

impl Serialize for SubeigenVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SubeigenJson {
            lambda: to_f64(&self.lambda),
            lambda_exact: Some(rational::fmt_q(&self.lambda)),
            entries: self.entries.iter().map(|(k, v)| (*k, to_f64(v))).collect(),
            deficiency: self.deficiency.clone(),
            truncation: self.truncation,
            tail_estimate: self.tail_estimate,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubeigenVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SubeigenJson::deserialize(d)?;
        let from = |x: f64| rational::from_f64(x).ok_or_else(|| D::Error::custom(format!("non-finite value {x}")));
        let lambda = match &raw.lambda_exact {
            Some(s) => rational::parse_q(s).map_err(D::Error::custom)?,
            None => from(raw.lambda)?,
        };
        let entries = raw
            .entries
            .into_iter()
            .map(|(k, v)| Ok((k, from(v)?)))
            .collect::<std::result::Result<_, D::Error>>()?;
        Ok(SubeigenVector {
            lambda,
            entries,
            deficiency: raw.deficiency,
            truncation: raw.truncation,
            tail_estimate: raw.tail_estimate,
        })
    }
}

impl SubeigenVector {
    pub fn new(lambda: Q, entries: BTreeMap<State, Q>) -> Result<Self> {
        if !lambda.is_positive() {
            return Err(Error::invalid("lambda must be positive"));
        }
        if let Some((s, _)) = entries.iter().find(|(_, v)| !v.is_positive()) {
            return Err(Error::invalid(format!("entry at {s} is not positive")));
        }
        Ok(SubeigenVector {
            lambda,
            entries,
            deficiency: Vec::new(),
            truncation: None,
            tail_estimate: None,
        })
    }

    /// Entries indexed by finite state number.
    pub fn from_finite(lambda: Q, values: Vec<Q>) -> Result<Self> {
        let entries = values.into_iter().enumerate().map(|(i, v)| (State::finite(i), v)).collect();
        Self::new(lambda, entries)
    }

    pub fn get(&self, s: &State) -> Option<&Q> {
        self.entries.get(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    /// Rows with `(Av)_i < λ v_i`.
    pub deficiencies: Vec<State>,
    /// Rows with `(Av)_i > λ v_i (1 + tol)`.
    pub violations: Vec<State>,
    /// Rows with a successor outside the support; their sums are truncated.
    pub boundary: Vec<State>,
    /// `max_i (Av)_i / v_i` over checked rows.
    pub max_ratio: f64,
    pub checked: usize,
}

/// Checks `Σ_j A_ij v_j ≤ λ v_i (1 + rel_tol)` on every row whose successors
/// all lie in the support of `v`, optionally only for cells in `window`.
pub fn verify_subeigenvector(
    ts: &TransitionStructure,
    v: &SubeigenVector,
    lambda: &Q,
    window: Option<(i64, i64)>,
    rel_tol: &Q,
) -> Result<VerifyReport> {
    if rel_tol.is_negative() {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    let slack = Q::one() + rel_tol;
    let mut rep = VerifyReport {
        ok: true,
        deficiencies: Vec::new(),
        violations: Vec::new(),
        boundary: Vec::new(),
        max_ratio: 0.0,
        checked: 0,
    };
    for (i, vi) in &v.entries {
        ts.check_state(i)?;
        if let Some((lo, hi)) = window {
            if i.cell < lo || i.cell > hi {
                continue;
            }
        }
        let Some(av) = apply_row(ts, v, i) else {
            rep.boundary.push(*i);
            continue;
        };
        rep.checked += 1;
        let bound = lambda * vi;
        if av < bound {
            rep.deficiencies.push(*i);
        }
        if av > &bound * &slack {
            rep.violations.push(*i);
        }
        rep.max_ratio = rep.max_ratio.max(to_f64(&(av / vi)));
    }
    rep.ok = rep.violations.is_empty();
    Ok(rep)
}

/// `(Av)_i`, or `None` when a successor of `i` is outside the support.
pub(crate) fn apply_row(ts: &TransitionStructure, v: &SubeigenVector, i: &State) -> Option<Q> {
    let mut acc = Q::zero();
    for (j, a) in ts.successors(i) {
        acc += v.get(&j)? * Q::from_integer(BigInt::from(a));
    }
    Some(acc)
}

#[derive(Debug, Clone, Copy)]
pub struct PruittOptions {
    /// Relative change between depths `N` and `2N` above which the series is
    /// declared divergent.
    pub divergence_tol: f64,
}

impl Default for PruittOptions {
    fn default() -> Self {
        PruittOptions { divergence_tol: 1e-6 }
    }
}

/// `v_k = Σ_{n=0}^{N} p_ka^(n) λ^{-n}`, exactly.
///
/// The limit vector satisfies `λ^{-1}(Av)_i = v_i − δ_ia`; the truncated one
/// exceeds that by `p_ia^(N+1) λ^{-N}` in row `i`, which the reported tail
/// estimate bounds relative to `v_a`.
pub fn pruitt_construct(ts: &TransitionStructure, a: &State, lambda: &Q, n: usize) -> Result<SubeigenVector> {
    pruitt_construct_with(ts, a, lambda, n, PruittOptions::default())
}

pub fn pruitt_construct_with(
    ts: &TransitionStructure,
    a: &State,
    lambda: &Q,
    n: usize,
    opts: PruittOptions,
) -> Result<SubeigenVector> {
    ts.check_state(a)?;
    if n == 0 {
        return Err(Error::invalid("series depth must be at least 1"));
    }
    if !lambda.is_positive() {
        return Err(Error::invalid("lambda must be positive"));
    }
    let loops = loop_logs(ts, a, 2 * n)?;
    let check = series_check(&loops, to_f64(lambda).ln(), n, opts.divergence_tol);
    if check.divergent {
        return Err(Error::Divergent(format!(
            "Σ p_aa^(n) λ^-n at λ = {lambda}: relative change {:.3e} from depth {n} to {}, terminal term ratio {:.6}",
            check.relative_change,
            2 * n,
            check.terminal_ratio
        )));
    }
    if check.terminal_ratio > 0.99 {
        warn!("λ = {lambda} is close to the growth rate of p_aa; the series converges slowly");
    }

    // λ = p/q: v_k = Σ c_k^(n) q^n p^(N-n) / p^N
    let p = lambda.numer().magnitude().clone();
    let q = lambda.denom().magnitude().clone();
    let mut p_pow = vec![BigUint::one(); n + 1];
    let mut q_pow = vec![BigUint::one(); n + 1];
    for k in 1..=n {
        p_pow[k] = &p_pow[k - 1] * &p;
        q_pow[k] = &q_pow[k - 1] * &q;
    }
    let g = crate::markov_chain::WindowGraph::around(ts, &[*a], n);
    let mut acc = vec![BigUint::zero(); g.len];
    crate::markov_chain::propagate::<BigUint>(
        &g,
        g.index(a),
        n,
        crate::markov_chain::Direction::Backward,
        None,
        |m, w| {
            let weight = &q_pow[m] * &p_pow[n - m];
            for (s, c) in acc.iter_mut().zip(w.iter()) {
                if !c.is_zero() {
                    *s += c * &weight;
                }
            }
        },
    );
    let denom = BigInt::from(p_pow[n].clone());
    let entries: BTreeMap<State, Q> = acc
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_zero())
        .map(|(k, s)| (g.state(k), Q::new(BigInt::from(s), denom.clone())))
        .collect();
    let mut v = SubeigenVector::new(lambda.clone(), entries)?;
    v.truncation = Some(Truncation {
        series_depth: n,
        window_radius: n * ts.band(),
    });
    v.tail_estimate = Some(check.tail_estimate);
    Ok(v)
}

/// `log p_aa^(n)` for `n = 0..=n_max`: exact up to a fixed depth, scaled after.
fn loop_logs(ts: &TransitionStructure, a: &State, n_max: usize) -> Result<Vec<f64>> {
    column_logs(ts, a, n_max, false)
}

/// `log p_aa^(n)` (or `log p_·a^(n)` when `column`), exact up to a fixed depth.
fn column_logs(ts: &TransitionStructure, a: &State, n_max: usize, column: bool) -> Result<Vec<f64>> {
    let exact_to = n_max.min(EXACT_DEPTH);
    let exact = path_counts(ts, a, a, exact_to)?;
    let seq = if column { &exact.p_dot_b } else { &exact.p_ab };
    let mut logs: Vec<f64> = seq.iter().map(|c| ln_bigint(&BigInt::from(c.clone()))).collect();
    if n_max > exact_to {
        let s = scaled_log_counts(ts, a, a, n_max)?;
        let tail = if column { s.log_p_dot_b } else { s.log_p_ab };
        logs.extend_from_slice(&tail[exact_to + 1..]);
    }
    Ok(logs)
}

struct SeriesCheck {
    sums: Vec<f64>,
    divergent: bool,
    relative_change: f64,
    terminal_ratio: f64,
    tail_estimate: f64,
}

/// Partial sums of `Σ exp(logs[n] − n ln λ)` up to `n`, compared with depth
/// `logs.len() − 1`.
fn series_check(logs: &[f64], ln_lambda: f64, n: usize, tol: f64) -> SeriesCheck {
    let terms: Vec<f64> = logs.iter().enumerate().map(|(k, l)| l - k as f64 * ln_lambda).collect();
    // log-space running sums
    let mut sums = Vec::with_capacity(terms.len());
    let mut acc = f64::NEG_INFINITY;
    for t in &terms {
        acc = log_add(acc, *t);
        sums.push(acc);
    }
    let deep = terms.len() - 1;
    let relative_change = (sums[deep] - sums[n]).exp_m1();
    let terminal_ratio = last_ratio(&terms);
    let divergent = !relative_change.is_finite() || relative_change > tol || terminal_ratio >= 1.0;
    let r = last_ratio(&terms[..=n]);
    let tail_estimate = if r < 1.0 {
        (terms[n] - sums[n]).exp() * r / (1.0 - r)
    } else {
        f64::INFINITY
    };
    SeriesCheck {
        sums: sums.into_iter().map(f64::exp).collect(),
        divergent,
        relative_change,
        terminal_ratio,
        tail_estimate,
    }
}

/// Ratio of the last two finite terms (given as logs).
fn last_ratio(terms: &[f64]) -> f64 {
    let finite: Vec<f64> = terms.iter().rev().filter(|t| t.is_finite()).take(2).cloned().collect();
    match finite.as_slice() {
        [last, prev] => (last - prev).exp(),
        _ => 0.0,
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Partial sums of `Σ_k v_k = Σ_n p_·a^(n) λ^{-n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summability {
    pub lambda: f64,
    pub depth: usize,
    /// Partial sums for `n = 0..=depth`.
    pub partial_sums: Vec<f64>,
    pub last: f64,
    /// `S_N + t_N r/(1−r)` with `r` the terminal term ratio, when `r < 1`.
    pub extrapolated: Option<f64>,
    /// Relative change of the partial sum from depth `N` to `2N`.
    pub relative_change: f64,
    pub terminal_ratio: f64,
    pub divergent: bool,
}

pub fn summability(ts: &TransitionStructure, a: &State, lambda: &Q, n: usize, tol: f64) -> Result<Summability> {
    ts.check_state(a)?;
    if n == 0 {
        return Err(Error::invalid("series depth must be at least 1"));
    }
    if !lambda.is_positive() {
        return Err(Error::invalid("lambda must be positive"));
    }
    let logs = column_logs(ts, a, 2 * n, true)?;
    let ln_lambda = to_f64(lambda).ln();
    let check = series_check(&logs, ln_lambda, n, tol);
    let partial_sums = check.sums[..=n].to_vec();
    let last = partial_sums[n];
    let r = last_ratio(&logs[..=n].iter().enumerate().map(|(k, l)| l - k as f64 * ln_lambda).collect::<Vec<_>>());
    let extrapolated = (r < 1.0).then(|| last + (logs[n] - n as f64 * ln_lambda).exp() * r / (1.0 - r));
    Ok(Summability {
        lambda: to_f64(lambda),
        depth: n,
        partial_sums,
        last,
        extrapolated,
        relative_change: check.relative_change,
        terminal_ratio: check.terminal_ratio,
        divergent: check.divergent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub ok: bool,
    /// States with `v_k (1 + tol) < v_a Σ_n taboo_ka^(n) λ^{-n}`.
    pub failures: Vec<State>,
    pub checked: usize,
}

/// Checks `v_k ≥ v_a Σ_{n=1}^{n_max} _a p_ka^(n) λ^{-n}` for every `k` in the
/// support, where `_a p` counts paths avoiding `a` between their ends.
///
/// A truncated series vector undershoots this by about its tail, hence the
/// relative tolerance.
pub fn pruitt_lower_bound_check(
    ts: &TransitionStructure,
    v: &SubeigenVector,
    a: &State,
    lambda: &Q,
    n_max: usize,
    rel_tol: &Q,
) -> Result<LowerBoundReport> {
    let va = v
        .get(a)
        .ok_or_else(|| Error::invalid(format!("anchor {a} is not in the support of v")))?;
    let series = taboo_series(ts, a, n_max)?;
    let inv = lambda.recip();
    let slack = Q::one() + rel_tol;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (k, counts) in &series {
        let Some(vk) = v.get(k) else { continue };
        checked += 1;
        let mut sum = Q::zero();
        let mut w = Q::one();
        for c in counts.iter().skip(1) {
            w *= &inv;
            if !c.is_zero() {
                sum += Q::from_integer(BigInt::from(c.clone())) * &w;
            }
        }
        if vk * &slack < va * sum {
            failures.push(*k);
        }
    }
    Ok(LowerBoundReport {
        ok: failures.is_empty(),
        failures,
        checked,
    })
}

/// Positive solutions of `Σ_d c_d m^d = λ` for a scalar band `A_{i,i+d} = c_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronReport {
    /// Least `λ` with a positive root.
    pub threshold: f64,
    /// The double root at the threshold.
    pub argmin: f64,
    /// `|d/dm Σ c_d m^d|` at `argmin`.
    pub derivative_at_argmin: f64,
    pub lambda: Option<f64>,
    /// Positive roots at `lambda`, ascending.
    pub roots: Vec<f64>,
}

/// Threshold and roots of the characteristic equation of a scalar band.
///
/// With `t = ln m` the function `h(t) = Σ c_d e^{dt}` is convex, so the
/// threshold is its minimum (found by bisection on `h'`) and each side of the
/// minimum holds at most one root.
pub fn banded_perron(coeffs: &BTreeMap<i64, f64>, lambda: Option<f64>, tol: f64) -> Result<PerronReport> {
    if coeffs.values().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::invalid("band coefficients must be finite and nonnegative"));
    }
    let up = coeffs.iter().any(|(d, c)| *d > 0 && *c > 0.0);
    let down = coeffs.iter().any(|(d, c)| *d < 0 && *c > 0.0);
    if !(up && down) {
        return Err(Error::NoPositiveRoot(
            "the band needs positive entries on both sides of the diagonal for a finite threshold".into(),
        ));
    }
    let h = |t: f64| coeffs.iter().map(|(d, c)| c * (*d as f64 * t).exp()).sum::<f64>();
    let dh = |t: f64| coeffs.iter().map(|(d, c)| *d as f64 * c * (*d as f64 * t).exp()).sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while dh(lo) > 0.0 {
        lo *= 2.0;
    }
    while dh(hi) < 0.0 {
        hi *= 2.0;
    }
    let t_star = bisect(dh, lo, hi, tol);
    let threshold = h(t_star);
    let mut roots = Vec::new();
    if let Some(l) = lambda {
        if l < threshold - tol {
            return Err(Error::NoPositiveRoot(format!("λ = {l} is below the threshold {threshold}")));
        }
        if (l - threshold).abs() <= tol {
            roots.push(t_star.exp());
        } else {
            let mut a = t_star - 1.0;
            while h(a) < l {
                a = t_star + 2.0 * (a - t_star);
            }
            let mut b = t_star + 1.0;
            while h(b) < l {
                b = t_star + 2.0 * (b - t_star);
            }
            roots.push(bisect(|t| l - h(t), a, t_star, tol).exp());
            roots.push(bisect(|t| h(t) - l, t_star, b, tol).exp());
        }
    }
    Ok(PerronReport {
        threshold,
        argmin: t_star.exp(),
        derivative_at_argmin: (dh(t_star) / t_star.exp()).abs(),
        lambda,
        roots,
    })
}

/// Root of an increasing function on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let tol = tol.max(f64::EPSILON);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol * 1e-3 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Coefficients of a scalar banded structure, or an error for other shapes.
pub fn scalar_band_coefficients(ts: &TransitionStructure) -> Result<BTreeMap<i64, f64>> {
    match ts {
        TransitionStructure::Banded {
            states_per_cell: 1,
            blocks,
            ..
        } => Ok(blocks.iter().map(|(d, b)| (*d, b[0][0].to_f64().unwrap_or(f64::NAN))).collect()),
        _ => Err(Error::invalid("expected a banded structure with one state per cell")),
    }
}
