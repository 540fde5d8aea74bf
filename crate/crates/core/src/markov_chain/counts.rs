use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{State, TransitionStructure, WindowGraph};
use crate::error::Result;

/// Path weights that can be propagated along the graph.
pub(crate) trait Weight: Clone {
    fn nil() -> Self;
    fn unit() -> Self;
    fn add_mul(&mut self, x: &Self, k: u64);
    fn is_nil(&self) -> bool;
}

impl Weight for BigUint {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn add_mul(&mut self, x: &Self, k: u64) {
        if k == 1 {
            *self += x;
        } else {
            *self += x * k;
        }
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
}

impl Weight for f64 {
    fn nil() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
    fn add_mul(&mut self, x: &Self, k: u64) {
        *self += x * k as f64;
    }
    fn is_nil(&self) -> bool {
        *self == 0.0
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// `v' = v A`: paths from the start state.
    Forward,
    /// `w' = A w`: paths into the start state.
    Backward,
}

/// Propagates `e_start` for `steps` steps, calling `observe(n, vec)` for
/// `n = 0..=steps`. After each observation the `taboo` index is cleared, so
/// paths visiting it at an intermediate step are discarded.
pub(crate) fn propagate<W: Weight>(
    g: &WindowGraph,
    start: usize,
    steps: usize,
    dir: Direction,
    taboo: Option<usize>,
    mut observe: impl FnMut(usize, &mut Vec<W>),
) {
    let edges = match dir {
        Direction::Forward => &g.succ,
        Direction::Backward => &g.pred,
    };
    let mut cur = vec![W::nil(); g.len];
    cur[start] = W::unit();
    observe(0, &mut cur);
    if let Some(t) = taboo {
        if t != start {
            cur[t] = W::nil();
        }
    }
    for n in 1..=steps {
        let mut next = vec![W::nil(); g.len];
        for (i, x) in cur.iter().enumerate() {
            if x.is_nil() {
                continue;
            }
            for &(j, a) in &edges[i] {
                next[j].add_mul(x, a);
            }
        }
        cur = next;
        observe(n, &mut cur);
        if let Some(t) = taboo {
            cur[t] = W::nil();
        }
    }
}

pub(crate) mod serde_big_vec {
    use num_bigint::BigUint;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&x.to_str_radix(10))?;
        }
        seq.end()
    }
}

/// Exact counts of length-`n` paths, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCountTable {
    pub from: String,
    pub to: String,
    /// Paths from `from` to `to`.
    #[serde(with = "serde_big_vec")]
    pub p_ab: Vec<BigUint>,
    /// Paths from `from` to anywhere.
    #[serde(with = "serde_big_vec")]
    pub p_a_dot: Vec<BigUint>,
    /// Paths from anywhere to `to`.
    #[serde(with = "serde_big_vec")]
    pub p_dot_b: Vec<BigUint>,
}

/// Exact path counts `p_ab`, `p_a·`, `p_·b`.
///
/// Banded structures are propagated on the cells within `n_max · band` of
/// the anchors; no path of length `<= n_max` that starts or ends at an anchor
/// leaves that window, so the counts are exact.
pub fn path_counts(ts: &TransitionStructure, a: &State, b: &State, n_max: usize) -> Result<PathCountTable> {
    ts.check_state(a)?;
    ts.check_state(b)?;
    let g = WindowGraph::around(ts, &[*a, *b], n_max);
    let (ia, ib) = (g.index(a), g.index(b));
    let mut p_ab = Vec::with_capacity(n_max + 1);
    let mut p_a_dot = Vec::with_capacity(n_max + 1);
    propagate::<BigUint>(&g, ia, n_max, Direction::Forward, None, |_, v| {
        p_ab.push(v[ib].clone());
        p_a_dot.push(v.iter().sum());
    });
    let mut p_dot_b = Vec::with_capacity(n_max + 1);
    propagate::<BigUint>(&g, ib, n_max, Direction::Backward, None, |_, w| {
        p_dot_b.push(w.iter().sum());
    });
    Ok(PathCountTable {
        from: ts.label(a),
        to: ts.label(b),
        p_ab,
        p_a_dot,
        p_dot_b,
    })
}

/// Natural logarithms of path counts, propagated in renormalized floating
/// point. Zero counts give `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledCounts {
    pub log_p_ab: Vec<f64>,
    pub log_p_a_dot: Vec<f64>,
    pub log_p_dot_b: Vec<f64>,
}

pub fn scaled_log_counts(ts: &TransitionStructure, a: &State, b: &State, n_max: usize) -> Result<ScaledCounts> {
    ts.check_state(a)?;
    ts.check_state(b)?;
    let g = WindowGraph::around(ts, &[*a, *b], n_max);
    let (ia, ib) = (g.index(a), g.index(b));
    let mut log_p_ab = Vec::with_capacity(n_max + 1);
    let mut log_p_a_dot = Vec::with_capacity(n_max + 1);
    let mut scale = 0.0;
    propagate::<f64>(&g, ia, n_max, Direction::Forward, None, |_, v| {
        log_p_ab.push(v[ib].ln() + scale);
        log_p_a_dot.push(v.iter().sum::<f64>().ln() + scale);
        scale += renormalize(v);
    });
    let mut log_p_dot_b = Vec::with_capacity(n_max + 1);
    let mut scale = 0.0;
    propagate::<f64>(&g, ib, n_max, Direction::Backward, None, |_, w| {
        log_p_dot_b.push(w.iter().sum::<f64>().ln() + scale);
        scale += renormalize(w);
    });
    Ok(ScaledCounts {
        log_p_ab,
        log_p_a_dot,
        log_p_dot_b,
    })
}

/// Divides by the maximum entry and returns its logarithm.
fn renormalize(v: &mut [f64]) -> f64 {
    let m = v.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 || m == 1.0 {
        return 0.0;
    }
    for x in v.iter_mut() {
        *x /= m;
    }
    m.ln()
}

/// First-entrance and first-return counts at an anchor `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabooCounts {
    pub anchor: String,
    /// Paths `i_0 … i_n` with `i_n = a` and `i_j ≠ a` for `j < n`; the empty
    /// path gives `fe^(0) = 1`.
    #[serde(with = "serde_big_vec")]
    pub first_entrance: Vec<BigUint>,
    /// Paths from `a` to `a` with no intermediate visit to `a`; index 0 is 0.
    #[serde(with = "serde_big_vec")]
    pub first_return: Vec<BigUint>,
}

pub fn taboo_counts(ts: &TransitionStructure, a: &State, n_max: usize) -> Result<TabooCounts> {
    ts.check_state(a)?;
    let g = WindowGraph::around(ts, &[*a], n_max);
    let ia = g.index(a);
    let mut first_entrance = Vec::with_capacity(n_max + 1);
    propagate::<BigUint>(&g, ia, n_max, Direction::Backward, Some(ia), |n, w| {
        if n == 0 {
            first_entrance.push(BigUint::one());
        } else {
            let total: BigUint = w.iter().sum();
            first_entrance.push(total - &w[ia]);
        }
    });
    let mut first_return = Vec::with_capacity(n_max + 1);
    propagate::<BigUint>(&g, ia, n_max, Direction::Forward, Some(ia), |n, v| {
        first_return.push(if n == 0 { BigUint::zero() } else { v[ia].clone() });
    });
    Ok(TabooCounts {
        anchor: ts.label(a),
        first_entrance,
        first_return,
    })
}

/// For every state `k` near `a`, the counts of paths `k = i_0, …, i_n = a`
/// with `i_j ≠ a` for `0 < j < n`, `n = 0..=n_max` (index 0 is always 0).
pub fn taboo_series(ts: &TransitionStructure, a: &State, n_max: usize) -> Result<BTreeMap<State, Vec<BigUint>>> {
    ts.check_state(a)?;
    let g = WindowGraph::around(ts, &[*a], n_max);
    let ia = g.index(a);
    let mut per_n: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
    propagate::<BigUint>(&g, ia, n_max, Direction::Backward, Some(ia), |n, w| {
        if n == 0 {
            per_n.push(vec![BigUint::zero(); w.len()]);
        } else {
            per_n.push(w.clone());
        }
    });
    let mut out = BTreeMap::new();
    for k in 0..g.len {
        if per_n.iter().any(|row| !row[k].is_zero()) {
            out.insert(g.state(k), per_n.iter().map(|row| row[k].clone()).collect());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvolutionReport {
    pub ok: bool,
    pub n_max: usize,
    /// Smallest `n` at which `p_·a^(n) ≠ Σ_k fe^(k) p_aa^(n−k)`.
    pub first_failure: Option<usize>,
}

/// Checks `p_·a^(n) = Σ_{k=0}^{n} fe^(k) p_aa^(n−k)` on given sequences.
pub fn convolution_identity_on(p_dot_a: &[BigUint], fe: &[BigUint], p_aa: &[BigUint]) -> ConvolutionReport {
    let n_max = p_dot_a.len().min(fe.len()).min(p_aa.len()).saturating_sub(1);
    let first_failure = (0..=n_max).find(|&n| {
        let rhs: BigUint = (0..=n).map(|k| &fe[k] * &p_aa[n - k]).sum();
        rhs != p_dot_a[n]
    });
    ConvolutionReport {
        ok: first_failure.is_none(),
        n_max,
        first_failure,
    }
}

pub fn convolution_identity_check(ts: &TransitionStructure, a: &State, n_max: usize) -> Result<ConvolutionReport> {
    let counts = path_counts(ts, a, a, n_max)?;
    let taboo = taboo_counts(ts, a, n_max)?;
    Ok(convolution_identity_on(
        &counts.p_dot_b,
        &taboo.first_entrance,
        &counts.p_ab,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gamma_prime() -> TransitionStructure {
        TransitionStructure::scalar_band(&[(-1, 1), (0, 2), (1, 2)]).unwrap()
    }

    fn big(xs: &[u64]) -> Vec<BigUint> {
        xs.iter().map(|&x| BigUint::from(x)).collect()
    }

    /// Brute-force enumeration of all length-`n` paths starting at `a`.
    fn enumerate(ts: &TransitionStructure, a: State, n: usize, visit: &mut impl FnMut(&[State], u64)) {
        fn rec(
            ts: &TransitionStructure,
            path: &mut Vec<State>,
            mult: u64,
            n: usize,
            visit: &mut impl FnMut(&[State], u64),
        ) {
            if path.len() == n + 1 {
                visit(path, mult);
                return;
            }
            let last = *path.last().unwrap();
            for (s, m) in ts.successors(&last) {
                path.push(s);
                rec(ts, path, mult * m, n, visit);
                path.pop();
            }
        }
        rec(ts, &mut vec![a], 1, n, visit);
    }

    #[test]
    fn gamma_prime_loops_by_hand() {
        let o = State::new(0, 0);
        let t = path_counts(&gamma_prime(), &o, &o, 4).unwrap();
        assert_eq!(t.p_ab, big(&[1, 2, 8, 32, 136]));
        assert_eq!(t.p_a_dot, big(&[1, 5, 25, 125, 625]));
    }

    #[test]
    fn gamma_prime_loops_match_enumeration() {
        let g = gamma_prime();
        let o = State::new(0, 0);
        let t = path_counts(&g, &o, &o, 6).unwrap();
        for n in 0..=6 {
            let mut loops = 0u64;
            enumerate(&g, o, n, &mut |p, m| {
                if *p.last().unwrap() == o {
                    loops += m;
                }
            });
            assert_eq!(t.p_ab[n], BigUint::from(loops), "n = {n}");
        }
    }

    #[test]
    fn gamma_prime_columns_are_powers_of_five() {
        let o = State::new(0, 0);
        let t = path_counts(&gamma_prime(), &o, &o, 40).unwrap();
        for (n, c) in t.p_dot_b.iter().enumerate() {
            assert_eq!(*c, BigUint::from(5u32).pow(n as u32));
        }
    }

    #[test]
    fn full_shift_counts() {
        let ts = TransitionStructure::full_shift(2);
        let t = path_counts(&ts, &State::finite(0), &State::finite(1), 10).unwrap();
        for n in 1..=10 {
            assert_eq!(t.p_ab[n], BigUint::from(1u64 << (n - 1)));
        }
    }

    #[test]
    fn window_enlargement_does_not_change_counts() {
        let g = gamma_prime();
        let o = State::new(0, 0);
        let far = State::new(9, 0);
        let near = path_counts(&g, &o, &o, 7).unwrap();
        let wide = path_counts(&g, &o, &far, 7).unwrap();
        assert_eq!(near.p_a_dot, wide.p_a_dot);
    }

    #[test]
    fn scaled_agrees_with_exact() {
        let g = gamma_prime();
        let o = State::new(0, 0);
        let exact = path_counts(&g, &o, &o, 60).unwrap();
        let scaled = scaled_log_counts(&g, &o, &o, 60).unwrap();
        for n in 0..=60 {
            let e = crate::rational::ln_bigint(&exact.p_ab[n].clone().into());
            assert!((e - scaled.log_p_ab[n]).abs() < 1e-9, "n = {n}");
            assert!((scaled.log_p_dot_b[n] - n as f64 * 5f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn first_entrance_by_hand() {
        let o = State::new(0, 0);
        let t = taboo_counts(&gamma_prime(), &o, 1).unwrap();
        assert_eq!(t.first_entrance, big(&[1, 3]));
        assert_eq!(t.first_return, big(&[0, 2]));
        let s = taboo_counts(&TransitionStructure::full_shift(2), &State::finite(0), 6).unwrap();
        assert_eq!(s.first_entrance, big(&[1, 1, 1, 1, 1, 1, 1]));
        assert_eq!(s.first_return, big(&[0, 1, 1, 1, 1, 1, 1]));
    }

    #[test]
    fn first_entrance_matches_filtered_enumeration() {
        let g = gamma_prime();
        let o = State::new(0, 0);
        let t = taboo_counts(&g, &o, 5).unwrap();
        for n in 1..=5 {
            // reversed paths into o are forward paths out of o in the transpose
            let mut count = 0u64;
            for c in -(n as i64)..=(n as i64) {
                enumerate(&g, State::new(c, 0), n, &mut |p, m| {
                    if p[n] == o && p[..n].iter().all(|s| *s != o) {
                        count += m;
                    }
                });
            }
            assert_eq!(t.first_entrance[n], BigUint::from(count));
        }
    }

    #[test]
    fn convolution_identity_holds() {
        let o = State::new(0, 0);
        assert!(convolution_identity_check(&gamma_prime(), &o, 30).unwrap().ok);
        let fs = TransitionStructure::full_shift(2);
        assert!(convolution_identity_check(&fs, &State::finite(0), 20).unwrap().ok);
    }

    #[test]
    fn corrupted_count_is_caught() {
        let o = State::new(0, 0);
        let g = gamma_prime();
        let c = path_counts(&g, &o, &o, 10).unwrap();
        let t = taboo_counts(&g, &o, 10).unwrap();
        let mut bad = c.p_dot_b.clone();
        bad[7] += 1u32;
        let r = convolution_identity_on(&bad, &t.first_entrance, &c.p_ab);
        assert!(!r.ok);
        assert_eq!(r.first_failure, Some(7));
    }

    #[test]
    fn taboo_series_at_anchor_is_first_return() {
        let o = State::new(0, 0);
        let g = gamma_prime();
        let s = taboo_series(&g, &o, 6).unwrap();
        let t = taboo_counts(&g, &o, 6).unwrap();
        assert_eq!(s[&o], t.first_return);
    }

    fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (1usize..4).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..3, k), k))
    }

    proptest! {
        #[test]
        fn chapman_kolmogorov(m in matrix_strategy(), n in 0usize..6, k in 0usize..6) {
            let ts = TransitionStructure::from_matrix(m.clone()).unwrap();
            let s = m.len();
            let counts = |a: usize, b: usize, len: usize| {
                path_counts(&ts, &State::finite(a), &State::finite(b), len).unwrap().p_ab[len].clone()
            };
            for a in 0..s {
                for b in 0..s {
                    let split: BigUint = (0..s).map(|c| counts(a, c, n) * counts(c, b, k)).sum();
                    prop_assert_eq!(counts(a, b, n + k), split);
                }
            }
        }

        #[test]
        fn convolution_on_random_finite(m in matrix_strategy(), a in 0usize..3) {
            let ts = TransitionStructure::from_matrix(m.clone()).unwrap();
            let a = State::finite(a % m.len());
            prop_assert!(convolution_identity_check(&ts, &a, 10).unwrap().ok);
        }

        #[test]
        fn column_dominates_loops(n in 1usize..30) {
            let o = State::new(0, 0);
            let t = path_counts(&gamma_prime(), &o, &o, n).unwrap();
            prop_assert!(t.p_dot_b[n] >= t.p_ab[n]);
        }
    }
}
