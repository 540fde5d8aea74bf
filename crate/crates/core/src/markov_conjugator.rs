//! Conjugacy to a map of slope at most λ from a summable λ-subeigenvector.
//!
//! With `λ_J = (Av)_J / v_J`, the cylinder `[I_0 … I_n]` receives mass
//! `Δψ = v_{I_n} / Π_{i<n} λ_{I_i}`; `ψ` is the cumulative mass of the
//! cylinders to the left of a point, and the conjugate map is affine with
//! slope `±λ_I` on `ψ(I)`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov_chain::{build_transition, refine, MarkovSystem, State, TransitionStructure};
use crate::pwl_map::PwlMap;
use crate::rational::{self, to_f64, Q};
use crate::subeigen::{apply_row, SubeigenVector};
use crate::table::MonotoneTable;

/// `λ_J = (Av)_J / v_J` for every row of `v` whose successors are all in its
/// support.
pub fn lambda_ratios(ts: &TransitionStructure, v: &SubeigenVector) -> Result<BTreeMap<State, Q>> {
    let mut out = BTreeMap::new();
    for (j, vj) in &v.entries {
        if !vj.is_positive() {
            return Err(Error::invalid(format!("entry at {j} is not positive")));
        }
        if let Some(av) = apply_row(ts, v, j) {
            out.insert(*j, av / vj);
        }
    }
    Ok(out)
}

/// `v / Σ v` for the states of a finite structure.
fn normalized(ms: &MarkovSystem, v: &SubeigenVector) -> Result<SubeigenVector> {
    if ms.is_lift() {
        return Err(Error::invalid("use windowed_conjugate for lifts"));
    }
    let k = ms.num_local();
    let mut values = Vec::with_capacity(k);
    for i in 0..k {
        let s = State::finite(i);
        values.push(
            v.get(&s)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("v has no entry for state {s}")))?,
        );
    }
    let total: Q = values.iter().sum();
    SubeigenVector::from_finite(v.lambda.clone(), values.into_iter().map(|x| x / &total).collect())
}

/// Subeigenvector data of a finite Markov system, normalized to mass one.
struct Setup {
    ts: TransitionStructure,
    v: SubeigenVector,
    ratios: BTreeMap<State, Q>,
}

fn setup(ms: &MarkovSystem, v: &SubeigenVector) -> Result<Setup> {
    let ts = build_transition(ms)?;
    let v = normalized(ms, v)?;
    let ratios = lambda_ratios(&ts, &v)?;
    if let Some((s, r)) = ratios.iter().find(|(_, r)| **r > v.lambda) {
        return Err(Error::invalid(format!(
            "v is not a {}-subeigenvector: (Av)/v = {r} at {s}",
            v.lambda
        )));
    }
    Ok(Setup { ts, v, ratios })
}

fn delta_psi(word: &[State], v: &SubeigenVector, ratios: &BTreeMap<State, Q>) -> Q {
    let mut x = v.get(word.last().unwrap()).unwrap().clone();
    for s in &word[..word.len() - 1] {
        x /= &ratios[s];
    }
    x
}

/// `Δψ` of every admissible word of length `1..=n_max + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPsiTable {
    pub values: BTreeMap<Vec<State>, Q>,
    pub n_max: usize,
}

pub fn delta_psi_table(ms: &MarkovSystem, v: &SubeigenVector, n_max: usize) -> Result<DeltaPsiTable> {
    let st = setup(ms, v)?;
    let mut values = BTreeMap::new();
    let mut level: Vec<Vec<State>> = (0..ms.num_local()).map(|i| vec![State::finite(i)]).collect();
    for depth in 0..=n_max {
        for w in &level {
            values.insert(w.clone(), delta_psi(w, &st.v, &st.ratios));
        }
        if depth < n_max {
            level = level
                .iter()
                .flat_map(|w| {
                    st.ts
                        .successors(w.last().unwrap())
                        .into_iter()
                        .map(move |(j, _)| [w.as_slice(), &[j]].concat())
                })
                .collect();
        }
    }
    Ok(DeltaPsiTable { values, n_max })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub ok: bool,
    pub additivity_checked: usize,
    pub shift_checked: usize,
    pub first_failure: Option<String>,
}

/// Checks, exactly, `Σ_{J ⊂ f(I_n)} Δψ([I_0…I_n J]) = Δψ([I_0…I_n])` and
/// `Δψ([I_1…I_n]) = λ_{I_0} Δψ([I_0…I_n])` on a table.
pub fn identity_checks_on(
    table: &DeltaPsiTable,
    ts: &TransitionStructure,
    ratios: &BTreeMap<State, Q>,
) -> IdentityReport {
    let mut rep = IdentityReport {
        ok: true,
        additivity_checked: 0,
        shift_checked: 0,
        first_failure: None,
    };
    let fmt = |w: &[State]| w.iter().map(|s| ts.label(s)).collect::<Vec<_>>().join(" ");
    for (w, val) in &table.values {
        if w.len() <= table.n_max {
            let sum: Q = ts
                .successors(w.last().unwrap())
                .into_iter()
                .map(|(j, _)| table.values[&[w.as_slice(), &[j]].concat()].clone())
                .sum();
            rep.additivity_checked += 1;
            if &sum != val && rep.first_failure.is_none() {
                rep.first_failure = Some(format!("additivity at [{}]", fmt(w)));
            }
        }
        if w.len() >= 2 {
            let tail = &table.values[&w[1..].to_vec()];
            rep.shift_checked += 1;
            if *tail != val * &ratios[&w[0]] && rep.first_failure.is_none() {
                rep.first_failure = Some(format!("shift relation at [{}]", fmt(w)));
            }
        }
    }
    rep.ok = rep.first_failure.is_none();
    rep
}

pub fn identity_checks(ms: &MarkovSystem, v: &SubeigenVector, n_max: usize) -> Result<IdentityReport> {
    let st = setup(ms, v)?;
    let table = delta_psi_table(ms, v, n_max)?;
    Ok(identity_checks_on(&table, &st.ts, &st.ratios))
}

/// `ψ` on the endpoints of the depth-`n` cylinders.
pub fn psi_on_refinement(ms: &MarkovSystem, v: &SubeigenVector, n: usize, cap: usize) -> Result<MonotoneTable> {
    let st = setup(ms, v)?;
    let cylinders = refine(ms, n, cap)?;
    let mut xs = Vec::with_capacity(cylinders.len() + 1);
    let mut ys = Vec::with_capacity(cylinders.len() + 1);
    let mut acc = Q::zero();
    for c in &cylinders {
        xs.push(c.lo.clone());
        ys.push(acc.clone());
        acc += delta_psi(&c.word, &st.v, &st.ratios);
    }
    xs.push(cylinders.last().map(|c| c.hi.clone()).unwrap_or_else(rational::one));
    ys.push(acc);
    MonotoneTable::new(xs, ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovConjugate {
    pub psi: MonotoneTable,
    pub g: PwlMap,
    #[serde(with = "rational::serde_q")]
    pub lip: Q,
    /// `λ_J` per partition interval.
    #[serde(serialize_with = "ser_ratios")]
    pub lambda_ratios: BTreeMap<State, Q>,
}

fn ser_ratios<S: serde::Serializer>(m: &BTreeMap<State, Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k, rational::fmt_q(v))))
}

/// `ψ` on the depth-`n` refinement and the map `g` with `g ∘ ψ = ψ ∘ f`.
///
/// `g` is determined by the partition points: `g(ψ(p)) = ψ(f(p))`, and is
/// affine with slope `±λ_I` on each `ψ(I)`.
pub fn build_conjugate(ms: &MarkovSystem, v: &SubeigenVector, n: usize, cap: usize) -> Result<MarkovConjugate> {
    let st = setup(ms, v)?;
    let psi = psi_on_refinement(ms, v, n, cap)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in ms.partition() {
        xs.push(psi.eval(p)?);
        ys.push(psi.eval(&ms.eval(p))?);
    }
    let g = PwlMap::new(xs, ys)?;
    Ok(MarkovConjugate {
        lip: g.lipschitz_constant(),
        psi,
        g,
        lambda_ratios: st.ratios,
    })
}

/// `|ψ(I)|` for each partition interval; equals the normalized `v`.
pub fn interval_masses(ms: &MarkovSystem, psi: &MonotoneTable) -> Result<SubeigenVector> {
    let lambda_free = Q::from_integer(1.into());
    let p = ms.partition();
    let mut values = Vec::with_capacity(p.len() - 1);
    for w in p.windows(2) {
        values.push(psi.eval(&w[1])? - psi.eval(&w[0])?);
    }
    SubeigenVector::from_finite(lambda_free, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// `max Δψ` over depth-`n` cylinders, `n = 0..=n_max`.
    #[serde(serialize_with = "ser_q_vec")]
    pub max_delta_psi: Vec<Q>,
    pub strictly_decreasing: bool,
}

fn ser_q_vec<S: serde::Serializer>(xs: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(to_f64))
}

/// `max Δψ` per depth by dynamic programming over the last symbol:
/// `best_n(J) = max_{I → J} best_{n-1}(I) / λ_I`, `max Δψ = max_J v_J best_n(J)`.
pub fn cylinder_diameter_decay(ms: &MarkovSystem, v: &SubeigenVector, n_max: usize) -> Result<DecayReport> {
    let st = setup(ms, v)?;
    let k = ms.num_local();
    let states: Vec<State> = (0..k).map(State::finite).collect();
    let mut best: Vec<Q> = vec![rational::one(); k];
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            best = states
                .iter()
                .map(|j| {
                    st.ts
                        .predecessors(j)
                        .into_iter()
                        .map(|(i, _)| &best[i.local] / &st.ratios[&i])
                        .max()
                        .unwrap_or_else(Q::zero)
                })
                .collect();
        }
        let m = states
            .iter()
            .map(|j| st.v.get(j).unwrap() * &best[j.local])
            .max()
            .unwrap();
        out.push(m);
    }
    let strictly_decreasing = out.windows(2).all(|w| w[1] < w[0]);
    Ok(DecayReport {
        max_delta_psi: out,
        strictly_decreasing,
    })
}

/// One affine piece of the conjugate on the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinePiece {
    pub state: State,
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
    #[serde(with = "rational::serde_q")]
    pub slope: Q,
}

/// Conjugate of a lift restricted to a window of cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedConjugate {
    pub cells: (i64, i64),
    /// Share of `Σ v` carried by the window.
    pub mass_inside: f64,
    pub mass_outside: f64,
    /// `(x, ψ(x))` at the partition points of the window.
    pub psi: Vec<(f64, f64)>,
    /// Pieces whose image stays in the window.
    pub pieces: Vec<LinePiece>,
    #[serde(with = "rational::serde_q")]
    pub max_slope: Q,
}

/// `ψ` and `g` for a lift on the smallest symmetric window of cells around
/// `center` that carries at least `1 − δ` of `Σ v`.
///
/// `ψ` is the cumulative mass from the left end of the window, so on a piece
/// `I` whose image stays in the window, `|ψ(f(I))| = (Av)_I` and the slope is
/// exactly `λ_I`.
pub fn windowed_conjugate(
    ms: &MarkovSystem,
    v: &SubeigenVector,
    center: i64,
    delta: f64,
) -> Result<WindowedConjugate> {
    if !ms.is_lift() {
        return Err(Error::invalid("windowed_conjugate expects a lift"));
    }
    let ts = build_transition(ms)?;
    let ratios = lambda_ratios(&ts, v)?;
    let s = ms.num_local();
    let total: Q = v.entries.values().sum();
    let cell_mass = |c: i64| -> Q { (0..s).filter_map(|k| v.get(&State::new(c, k))).sum() };
    let (min_cell, max_cell) = match (v.entries.keys().next(), v.entries.keys().next_back()) {
        (Some(a), Some(b)) => (a.cell, b.cell),
        _ => return Err(Error::invalid("v is empty")),
    };
    let mut r = 0i64;
    let mut inside = cell_mass(center);
    let target = &total * rational::from_f64(1.0 - delta).ok_or_else(|| Error::invalid("delta must be finite"))?;
    while inside < target {
        r += 1;
        if center - r < min_cell && center + r > max_cell {
            break;
        }
        inside += cell_mass(center - r) + cell_mass(center + r);
    }
    let (lo, hi) = (center - r, center + r);
    let window_states: Vec<State> = (lo..=hi).flat_map(|c| (0..s).map(move |k| State::new(c, k))).collect();

    let mut points = Vec::new();
    let mut psi_at: BTreeMap<Q, Q> = BTreeMap::new();
    let mut acc = Q::zero();
    for st in &window_states {
        let vi = v
            .get(st)
            .ok_or_else(|| Error::invalid(format!("v has no entry for {st} inside the window")))?;
        let (a, _) = ms.interval(st);
        psi_at.insert(a.clone(), acc.clone());
        points.push((to_f64(&a), to_f64(&acc)));
        acc += vi;
    }
    let end = ms.interval(window_states.last().unwrap()).1;
    psi_at.insert(end.clone(), acc.clone());
    points.push((to_f64(&end), to_f64(&acc)));

    let mut pieces = Vec::new();
    let mut max_slope = Q::zero();
    for st in &window_states {
        let (a, b) = ms.interval(st);
        let (fa, fb) = (ms.eval(&a), ms.eval(&b));
        let (Some(ga), Some(gb)) = (psi_at.get(&fa), psi_at.get(&fb)) else {
            continue;
        };
        let (pa, pb) = (&psi_at[&a], &psi_at[&b]);
        let slope = ((gb - ga) / (pb - pa)).abs();
        if let Some(r) = ratios.get(st) {
            debug_assert_eq!(&slope, r);
        }
        if slope > max_slope {
            max_slope = slope.clone();
        }
        pieces.push(LinePiece {
            state: *st,
            psi_lo: to_f64(pa),
            psi_hi: to_f64(pb),
            g_lo: to_f64(ga),
            g_hi: to_f64(gb),
            slope,
        });
    }
    let mass_inside = to_f64(&(&inside / &total));
    Ok(WindowedConjugate {
        cells: (lo, hi),
        mass_inside,
        mass_outside: 1.0 - mass_inside,
        psi: points,
        pieces,
        max_slope,
    })
}
