use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{State, TransitionStructure};
use crate::error::{Error, Result};
use crate::pwl_map::{PeriodicLift, PwlMap};
use crate::rational::{self, qi, Q};

/// The dynamics underlying a Markov partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarkovMap {
    Interval(PwlMap),
    Lift(PeriodicLift),
}

/// A map with a forward-invariant partition on whose intervals it is monotone.
///
/// For an interval map the partition lists points of `[0,1]` including both
/// ends and state `(0, k)` is `[p_k, p_{k+1}]`. For a lift it lists offsets
/// `o_0 < … < o_{s-1}` in `[0,1)`, the partition is `ℤ + {o_k}`, and state
/// `(z, k)` is `[z + o_k, z + o_{k+1}]` with `o_s = o_0 + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SystemJson", into = "SystemJson")]
pub struct MarkovSystem {
    map: MarkovMap,
    partition: Vec<Q>,
}

#[derive(Serialize, Deserialize)]
struct SystemJson {
    map: MarkovMap,
    #[serde(with = "rational::serde_q_vec")]
    partition: Vec<Q>,
}

impl TryFrom<SystemJson> for MarkovSystem {
    type Error = Error;

    fn try_from(raw: SystemJson) -> Result<Self> {
        MarkovSystem::new(raw.map, raw.partition)
    }
}

impl From<MarkovSystem> for SystemJson {
    fn from(m: MarkovSystem) -> Self {
        SystemJson {
            map: m.map,
            partition: m.partition,
        }
    }
}

type Segment = ((Q, Q), (Q, Q));

impl MarkovSystem {
    pub fn new(map: MarkovMap, partition: Vec<Q>) -> Result<Self> {
        if partition.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("partition must be strictly increasing"));
        }
        match &map {
            MarkovMap::Interval(_) => {
                if partition.len() < 2
                    || !partition[0].is_zero()
                    || !partition[partition.len() - 1].is_one()
                {
                    return Err(Error::invalid("an interval partition must contain 0 and 1"));
                }
            }
            MarkovMap::Lift(_) => {
                if partition.is_empty() || partition.iter().any(|o| o.is_negative() || *o >= Q::one()) {
                    return Err(Error::invalid("lift partition offsets must lie in [0,1)"));
                }
            }
        }
        let ms = MarkovSystem { map, partition };
        for k in 0..ms.num_local() {
            let st = State::new(0, k);
            ms.orientation(&st)?;
        }
        for p in &ms.partition {
            let y = ms.eval(p);
            if !ms.is_partition_point(&y) {
                return Err(Error::NonMarkov(format!("image {y} of partition point {p} is not a partition point")));
            }
        }
        Ok(ms)
    }

    pub fn interval_map(map: PwlMap, partition: Vec<Q>) -> Result<Self> {
        Self::new(MarkovMap::Interval(map), partition)
    }

    pub fn lift(lift: PeriodicLift, offsets: Vec<Q>) -> Result<Self> {
        Self::new(MarkovMap::Lift(lift), offsets)
    }

    pub fn map(&self) -> &MarkovMap {
        &self.map
    }

    pub fn partition(&self) -> &[Q] {
        &self.partition
    }

    pub fn is_lift(&self) -> bool {
        matches!(self.map, MarkovMap::Lift(_))
    }

    /// Number of partition intervals (per cell for lifts).
    pub fn num_local(&self) -> usize {
        match self.map {
            MarkovMap::Interval(_) => self.partition.len() - 1,
            MarkovMap::Lift(_) => self.partition.len(),
        }
    }

    pub fn eval(&self, x: &Q) -> Q {
        match &self.map {
            MarkovMap::Interval(f) => f.eval_unchecked(x),
            MarkovMap::Lift(f) => f.eval(x),
        }
    }

    /// Endpoints of the partition interval of a state.
    pub fn interval(&self, st: &State) -> (Q, Q) {
        match self.map {
            MarkovMap::Interval(_) => (self.partition[st.local].clone(), self.partition[st.local + 1].clone()),
            MarkovMap::Lift(_) => {
                let z = qi(st.cell);
                let lo = &z + &self.partition[st.local];
                let hi = if st.local + 1 < self.partition.len() {
                    &z + &self.partition[st.local + 1]
                } else {
                    &z + Q::one() + &self.partition[0]
                };
                (lo, hi)
            }
        }
    }

    fn is_partition_point(&self, y: &Q) -> bool {
        match self.map {
            MarkovMap::Interval(_) => self.partition.binary_search(y).is_ok(),
            MarkovMap::Lift(_) => {
                let t = y - qi(crate::pwl_map::floor_q(y));
                self.partition.binary_search(&t).is_ok()
            }
        }
    }

    /// The state whose interval starts at the partition point `y`.
    fn state_starting_at(&self, y: &Q) -> Option<State> {
        match self.map {
            MarkovMap::Interval(_) => {
                let k = self.partition.binary_search(y).ok()?;
                (k + 1 < self.partition.len()).then_some(State::new(0, k))
            }
            MarkovMap::Lift(_) => {
                let z = crate::pwl_map::floor_q(&(y - &self.partition[0]));
                let t = y - qi(z);
                let k = self.partition.binary_search(&t).ok()?;
                Some(State::new(z, k))
            }
        }
    }

    /// Affine segments of the map over `[a, b]`, clipped to it.
    fn segments_in(&self, a: &Q, b: &Q) -> Vec<Segment> {
        let raw: Vec<Segment> = match &self.map {
            MarkovMap::Interval(f) => f
                .pieces()
                .map(|p| ((p.x0.clone(), p.y0.clone()), (p.x1.clone(), p.y1.clone())))
                .collect(),
            MarkovMap::Lift(f) => {
                let lo = crate::pwl_map::floor_q(a) - 1;
                let hi = crate::pwl_map::ceil_q(b);
                (lo..=hi)
                    .flat_map(|z| (0..f.segments_per_cell()).map(move |i| (z, i)))
                    .map(|(z, i)| f.segment(z, i))
                    .collect()
            }
        };
        raw.into_iter()
            .filter(|((x0, _), (x1, _))| x0 < b && x1 > a)
            .map(|((x0, y0), (x1, y1))| {
                let at = |x: &Q| &y0 + (x - &x0) * (&y1 - &y0) / (&x1 - &x0);
                let l = if &x0 < a { a.clone() } else { x0.clone() };
                let r = if &x1 > b { b.clone() } else { x1.clone() };
                let (yl, yr) = (at(&l), at(&r));
                ((l, yl), (r, yr))
            })
            .collect()
    }

    /// `true` when the map increases on the state's interval.
    fn orientation(&self, st: &State) -> Result<bool> {
        let (a, b) = self.interval(st);
        let segs = self.segments_in(&a, &b);
        let inc = segs.iter().all(|((_, y0), (_, y1))| y1 > y0);
        let dec = segs.iter().all(|((_, y0), (_, y1))| y1 < y0);
        if !(inc || dec) {
            return Err(Error::NonMarkov(format!("map is not strictly monotone on [{a}, {b}]")));
        }
        Ok(inc)
    }

    /// Image interval of a state, as `(lo, hi)`.
    pub fn image(&self, st: &State) -> (Q, Q) {
        let (a, b) = self.interval(st);
        let (fa, fb) = (self.eval(&a), self.eval(&b));
        if fa <= fb {
            (fa, fb)
        } else {
            (fb, fa)
        }
    }

    /// The `x` in the state's interval with `f(x) = y`.
    pub fn branch_inverse(&self, st: &State, y: &Q) -> Result<Q> {
        let (a, b) = self.interval(st);
        for ((x0, y0), (x1, y1)) in self.segments_in(&a, &b) {
            let (lo, hi) = crate::pwl_map::order(&y0, &y1);
            if lo <= y && y <= hi {
                return Ok(&x0 + (y - &y0) * (&x1 - &x0) / (&y1 - &y0));
            }
        }
        Err(Error::OutOfDomain {
            x: y.to_string(),
            domain: format!("f([{a}, {b}])"),
        })
    }

    /// States whose intervals tile `[lo, hi]` (both partition points).
    fn states_covering(&self, lo: &Q, hi: &Q) -> Result<Vec<State>> {
        let mut out = Vec::new();
        let mut cur = lo.clone();
        while &cur < hi {
            let st = self
                .state_starting_at(&cur)
                .ok_or_else(|| Error::NonMarkov(format!("{cur} is not a partition point")))?;
            cur = self.interval(&st).1;
            out.push(st);
        }
        if &cur != hi {
            return Err(Error::NonMarkov(format!("{hi} is not a partition point")));
        }
        Ok(out)
    }

    /// States `J` with `J ⊂ f(I)`.
    pub fn successors(&self, st: &State) -> Result<Vec<State>> {
        let (lo, hi) = self.image(st);
        if lo == hi {
            return Err(Error::NonMarkov(format!("state {st} collapses to a point")));
        }
        self.states_covering(&lo, &hi)
    }
}

/// `A_{IJ} = 1` iff `f(I) ⊃ J`.
///
/// Forward invariance of the partition and monotonicity on each interval
/// imply that every image is a union of partition intervals, so the
/// remaining pairs have disjoint interiors.
pub fn build_transition(ms: &MarkovSystem) -> Result<TransitionStructure> {
    let s = ms.num_local();
    match ms.map {
        MarkovMap::Interval(_) => {
            let mut matrix = vec![vec![0u64; s]; s];
            for (i, row) in matrix.iter_mut().enumerate() {
                for j in ms.successors(&State::finite(i))? {
                    row[j.local] = 1;
                }
            }
            let states = (0..s).map(|i| format!("I{i}")).collect();
            TransitionStructure::finite(states, matrix)
        }
        MarkovMap::Lift(_) => {
            let mut blocks: BTreeMap<i64, Vec<Vec<u64>>> = BTreeMap::new();
            for i in 0..s {
                for j in ms.successors(&State::new(0, i))? {
                    blocks.entry(j.cell).or_insert_with(|| vec![vec![0; s]; s])[i][j.local] = 1;
                }
            }
            let band = blocks.keys().map(|d| d.unsigned_abs() as usize).max().unwrap_or(1).max(1);
            TransitionStructure::banded(s, band, blocks)
        }
    }
}

/// A nonempty cylinder `[I_0 … I_n]` and its realization in the line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CylinderWord {
    pub word: Vec<State>,
    #[serde(with = "rational::serde_q")]
    pub lo: Q,
    #[serde(with = "rational::serde_q")]
    pub hi: Q,
}

impl CylinderWord {
    pub fn depth(&self) -> usize {
        self.word.len() - 1
    }

    pub fn length(&self) -> Q {
        &self.hi - &self.lo
    }
}

/// All depth-`n` cylinders of an interval map, sorted left to right.
pub fn refine(ms: &MarkovSystem, n: usize, cap: usize) -> Result<Vec<CylinderWord>> {
    if ms.is_lift() {
        return Err(Error::invalid("refining a lift needs a window of starting cells; use refine_window"));
    }
    let starts: Vec<State> = (0..ms.num_local()).map(State::finite).collect();
    refine_window(ms, n, &starts, cap)
}

/// Depth-`n` cylinders whose first symbol is one of `starts`, sorted.
///
/// The realization of `[I_0 … I_k J]` is the pullback of `I_k ∩ f^{-1}J`
/// through the branch inverses of `I_{k-1}, …, I_0`.
pub fn refine_window(ms: &MarkovSystem, n: usize, starts: &[State], cap: usize) -> Result<Vec<CylinderWord>> {
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(n + 1);
    for st in starts {
        let (lo, hi) = ms.interval(st);
        word.push(*st);
        extend(ms, n, &mut word, lo, hi, cap, &mut out)?;
        word.pop();
    }
    out.sort_by(|a, b| a.lo.cmp(&b.lo));
    Ok(out)
}

fn extend(
    ms: &MarkovSystem,
    n: usize,
    word: &mut Vec<State>,
    lo: Q,
    hi: Q,
    cap: usize,
    out: &mut Vec<CylinderWord>,
) -> Result<()> {
    if word.len() == n + 1 {
        if out.len() >= cap {
            return Err(Error::ResourceCap {
                what: "cylinders",
                count: out.len() + 1,
                cap,
            });
        }
        out.push(CylinderWord {
            word: word.clone(),
            lo,
            hi,
        });
        return Ok(());
    }
    let last = *word.last().unwrap();
    for j in ms.successors(&last)? {
        let (jl, jh) = ms.interval(&j);
        let mut a = ms.branch_inverse(&last, &jl)?;
        let mut b = ms.branch_inverse(&last, &jh)?;
        for st in word[..word.len() - 1].iter().rev() {
            a = ms.branch_inverse(st, &a)?;
            b = ms.branch_inverse(st, &b)?;
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        word.push(j);
        extend(ms, n, word, a, b, cap, out)?;
        word.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn tent_system() -> MarkovSystem {
        MarkovSystem::interval_map(PwlMap::tent(), vec![qi(0), q(1, 2), qi(1)]).unwrap()
    }

    fn f_a_system() -> MarkovSystem {
        MarkovSystem::interval_map(PwlMap::full_tent_at(q(3, 5)).unwrap(), vec![qi(0), q(3, 5), qi(1)]).unwrap()
    }

    fn gap_system() -> MarkovSystem {
        MarkovSystem::lift(PeriodicLift::gap_example(), vec![qi(0), q(3, 5)]).unwrap()
    }

    #[test]
    fn full_branches_give_all_ones() {
        let ones = TransitionStructure::finite(vec!["I0".into(), "I1".into()], vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(build_transition(&tent_system()).unwrap(), ones);
        assert_eq!(build_transition(&f_a_system()).unwrap(), ones);
    }

    #[test]
    fn gap_lift_degrees() {
        let ts = build_transition(&gap_system()).unwrap();
        assert_eq!(ts.band(), 1);
        for z in [-3i64, 0, 5] {
            let out_i: u64 = ts.successors(&State::new(z, 0)).iter().map(|(_, a)| a).sum();
            let out_j: u64 = ts.successors(&State::new(z, 1)).iter().map(|(_, a)| a).sum();
            assert_eq!((out_i, out_j), (6, 4));
            for s in 0..2 {
                let inn: u64 = ts.predecessors(&State::new(z, s)).iter().map(|(_, a)| a).sum();
                assert_eq!(inn, 5);
            }
        }
    }

    #[test]
    fn gap_lift_covering_matches_brute_force() {
        // J ⊂ F(I) iff the midpoint of J lies strictly inside F(I), for
        // partition intervals with partition-point images
        let ms = gap_system();
        let ts = build_transition(&ms).unwrap();
        for i in 0..2 {
            let from = State::new(0, i);
            let (lo, hi) = ms.image(&from);
            for c in -3..=3 {
                for j in 0..2 {
                    let to = State::new(c, j);
                    let (a, b) = ms.interval(&to);
                    let mid = (a + b) / qi(2);
                    let inside = lo < mid && mid < hi;
                    assert_eq!(ts.entry(&from, &to) == 1, inside, "{from} -> {to}");
                }
            }
        }
    }

    #[test]
    fn rejects_non_invariant_partition() {
        let err = MarkovSystem::interval_map(PwlMap::tent(), vec![qi(0), q(1, 3), q(1, 2), qi(1)]).unwrap_err();
        assert!(matches!(err, Error::NonMarkov(_)));
        let err = MarkovSystem::interval_map(PwlMap::tent(), vec![qi(0), qi(1)]).unwrap_err();
        assert!(matches!(err, Error::NonMarkov(_)));
    }

    #[test]
    fn tent_depth_one() {
        let cyl = refine(&tent_system(), 1, 1000).unwrap();
        let ends: Vec<Q> = cyl.iter().map(|c| c.lo.clone()).chain([qi(1)]).collect();
        assert_eq!(ends, vec![qi(0), q(1, 4), q(1, 2), q(3, 4), qi(1)]);
    }

    #[test]
    fn f_a_depth_one() {
        let cyl = refine(&f_a_system(), 1, 1000).unwrap();
        assert_eq!(cyl.len(), 4);
        assert_eq!(cyl[0].word, vec![State::finite(0), State::finite(0)]);
        assert_eq!((cyl[0].lo.clone(), cyl[0].hi.clone()), (qi(0), q(9, 25)));
    }

    #[test]
    fn cylinders_map_onto_last_symbol() {
        let ms = f_a_system();
        for n in 0..5 {
            let cyl = refine(&ms, n, 1 << 12).unwrap();
            assert_eq!(cyl.len(), 2 << n);
            for c in &cyl {
                let (mut a, mut b) = (c.lo.clone(), c.hi.clone());
                for (k, st) in c.word.iter().enumerate() {
                    let (l, h) = ms.interval(st);
                    let (lo, hi) = if a <= b { (&a, &b) } else { (&b, &a) };
                    assert!(&l <= lo && hi <= &h);
                    if k == n {
                        assert!((lo, hi) == (&l, &h));
                    }
                    a = ms.eval(&a);
                    b = ms.eval(&b);
                }
            }
            // cylinders tile [0,1]
            assert!(cyl.windows(2).all(|w| w[0].hi == w[1].lo));
        }
    }

    #[test]
    fn max_cylinder_length_decreases() {
        let ms = f_a_system();
        let mut prev = qi(2);
        for n in 0..7 {
            let m = refine(&ms, n, 1 << 12).unwrap().iter().map(|c| c.length()).max().unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < q(1, 10));
    }

    #[test]
    fn partition_images_remain_partition_points() {
        let ms = f_a_system();
        let cyl = refine(&ms, 3, 1 << 12).unwrap();
        let points: Vec<Q> = cyl.iter().map(|c| c.lo.clone()).chain([qi(1)]).collect();
        let depth2: Vec<Q> = refine(&ms, 2, 1 << 12).unwrap().iter().map(|c| c.lo.clone()).chain([qi(1)]).collect();
        for p in &points {
            assert!(depth2.binary_search(&ms.eval(p)).is_ok());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = refine(&tent_system(), 4, 10).unwrap_err();
        assert!(err.is_resource_cap());
    }

    #[test]
    fn lift_window_refinement() {
        let ms = gap_system();
        let cyl = refine_window(&ms, 2, &[State::new(0, 0), State::new(0, 1)], 1000).unwrap();
        assert_eq!(cyl.len(), 6 * 5 + 4 * 5);
        assert!(cyl.windows(2).all(|w| w[0].hi == w[1].lo));
        assert_eq!(cyl.first().unwrap().lo, qi(0));
        assert_eq!(cyl.last().unwrap().hi, qi(1));
    }

    #[test]
    fn json_roundtrip() {
        let ms = gap_system();
        let js = serde_json::to_string(&ms).unwrap();
        assert_eq!(js, r#"{"map":{"turning":[["0","-1"],["3/5","2"]]},"partition":["0","3/5"]}"#);
        assert_eq!(serde_json::from_str::<MarkovSystem>(&js).unwrap(), ms);
    }
}
