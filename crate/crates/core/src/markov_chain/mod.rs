//! Transition structures, Markov partitions and exact path counting.

mod counts;
pub(crate) use counts::{propagate, Direction};
mod entropy;
mod system;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use counts::{
    convolution_identity_check, convolution_identity_on, path_counts, scaled_log_counts,
    taboo_counts, taboo_series, ConvolutionReport, PathCountTable, ScaledCounts, TabooCounts,
};
pub use entropy::{entropy_estimates, CountMode, EntropyEstimates, Estimator};
pub use system::{build_transition, refine, refine_window, CylinderWord, MarkovMap, MarkovSystem};

/// A vertex of a transition structure.
///
/// Finite structures use `cell = 0` and `local` as the state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub cell: i64,
    pub local: usize,
}

impl State {
    pub fn new(cell: i64, local: usize) -> Self {
        State { cell, local }
    }

    pub fn finite(index: usize) -> Self {
        State { cell: 0, local: index }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.cell, self.local)
    }
}

impl Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for State {
    type Err = Error;

    /// Accepts `c`, `c,s` and `(c,s)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let bad = || Error::invalid(format!("cannot parse state {s:?}"));
        let mut parts = t.split(',').map(str::trim);
        let cell = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let local = match parts.next() {
            Some(p) => p.parse().map_err(|_| bad())?,
            None => 0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(State { cell, local })
    }
}

/// A row-finite nonnegative integer matrix, either finite or invariant under
/// the cell shift `(c, s) -> (c + 1, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TsJson", into = "TsJson")]
pub enum TransitionStructure {
    Finite {
        states: Vec<String>,
        matrix: Vec<Vec<u64>>,
    },
    /// `blocks[d][i][j]` is the entry from `(c, i)` to `(c + d, j)`.
    Banded {
        states_per_cell: usize,
        band: usize,
        blocks: BTreeMap<i64, Vec<Vec<u64>>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TsJson {
    Finite {
        states: Vec<String>,
        matrix: Vec<Vec<u64>>,
    },
    Banded {
        states_per_cell: usize,
        band: usize,
        // string keys: integer keys do not survive the tagged-enum buffer
        blocks: BTreeMap<String, Vec<Vec<u64>>>,
    },
}

impl TryFrom<TsJson> for TransitionStructure {
    type Error = Error;

    fn try_from(raw: TsJson) -> Result<Self> {
        match raw {
            TsJson::Finite { states, matrix } => TransitionStructure::finite(states, matrix),
            TsJson::Banded {
                states_per_cell,
                band,
                blocks,
            } => {
                let blocks = blocks
                    .into_iter()
                    .map(|(k, v)| {
                        k.trim()
                            .parse::<i64>()
                            .map(|d| (d, v))
                            .map_err(|_| Error::invalid(format!("block offset {k:?} is not an integer")))
                    })
                    .collect::<Result<_>>()?;
                TransitionStructure::banded(states_per_cell, band, blocks)
            }
        }
    }
}

impl From<TransitionStructure> for TsJson {
    fn from(t: TransitionStructure) -> Self {
        match t {
            TransitionStructure::Finite { states, matrix } => TsJson::Finite { states, matrix },
            TransitionStructure::Banded {
                states_per_cell,
                band,
                blocks,
            } => TsJson::Banded {
                states_per_cell,
                band,
                blocks: blocks.into_iter().map(|(d, v)| (d.to_string(), v)).collect(),
            },
        }
    }
}

impl TransitionStructure {
    pub fn finite(states: Vec<String>, matrix: Vec<Vec<u64>>) -> Result<Self> {
        let k = states.len();
        if k == 0 {
            return Err(Error::invalid("a finite structure needs at least one state"));
        }
        if matrix.len() != k || matrix.iter().any(|r| r.len() != k) {
            return Err(Error::invalid(format!("matrix must be {k}x{k}")));
        }
        Ok(TransitionStructure::Finite { states, matrix })
    }

    /// Finite structure with states named `0..k`.
    pub fn from_matrix(matrix: Vec<Vec<u64>>) -> Result<Self> {
        let states = (0..matrix.len()).map(|i| i.to_string()).collect();
        Self::finite(states, matrix)
    }

    /// The full shift on `k` symbols.
    pub fn full_shift(k: usize) -> Self {
        Self::from_matrix(vec![vec![1; k]; k]).expect("square")
    }

    pub fn banded(states_per_cell: usize, band: usize, blocks: BTreeMap<i64, Vec<Vec<u64>>>) -> Result<Self> {
        if states_per_cell == 0 || band == 0 {
            return Err(Error::invalid("states_per_cell and band must be at least 1"));
        }
        let s = states_per_cell;
        for (d, b) in &blocks {
            if d.unsigned_abs() as usize > band {
                return Err(Error::invalid(format!("block offset {d} exceeds band {band}")));
            }
            if b.len() != s || b.iter().any(|r| r.len() != s) {
                return Err(Error::invalid(format!("block {d} must be {s}x{s}")));
            }
        }
        Ok(TransitionStructure::Banded {
            states_per_cell,
            band,
            blocks,
        })
    }

    /// One state per cell with `A_{i, i+d} = coeffs[d]`.
    pub fn scalar_band(coeffs: &[(i64, u64)]) -> Result<Self> {
        let band = coeffs.iter().map(|(d, _)| d.unsigned_abs() as usize).max().unwrap_or(1).max(1);
        let blocks = coeffs.iter().map(|&(d, c)| (d, vec![vec![c]])).collect();
        Self::banded(1, band, blocks)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TransitionStructure::Finite { .. })
    }

    /// States in the finite case, or states of one cell in the banded case.
    pub fn states_per_cell(&self) -> usize {
        match self {
            TransitionStructure::Finite { states, .. } => states.len(),
            TransitionStructure::Banded { states_per_cell, .. } => *states_per_cell,
        }
    }

    /// Maximal cell displacement of one step (0 for finite structures).
    pub fn band(&self) -> usize {
        match self {
            TransitionStructure::Finite { .. } => 0,
            TransitionStructure::Banded { band, .. } => *band,
        }
    }

    pub fn contains(&self, s: &State) -> bool {
        match self {
            TransitionStructure::Finite { states, .. } => s.cell == 0 && s.local < states.len(),
            TransitionStructure::Banded { states_per_cell, .. } => s.local < *states_per_cell,
        }
    }

    pub fn check_state(&self, s: &State) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::invalid(format!("state {s} is not in the structure")))
        }
    }

    /// Human-readable name of a state.
    pub fn label(&self, s: &State) -> String {
        match self {
            TransitionStructure::Finite { states, .. } => states[s.local].clone(),
            TransitionStructure::Banded { .. } => s.to_string(),
        }
    }

    /// Looks a state up by finite name, or parses `c`, `c,s`, `(c,s)`.
    pub fn parse_state(&self, text: &str) -> Result<State> {
        if let TransitionStructure::Finite { states, .. } = self {
            if let Some(i) = states.iter().position(|n| n == text) {
                return Ok(State::finite(i));
            }
        }
        let s: State = text.parse()?;
        self.check_state(&s)?;
        Ok(s)
    }

    pub fn entry(&self, from: &State, to: &State) -> u64 {
        match self {
            TransitionStructure::Finite { matrix, .. } => matrix[from.local][to.local],
            TransitionStructure::Banded { blocks, .. } => blocks
                .get(&(to.cell - from.cell))
                .map_or(0, |b| b[from.local][to.local]),
        }
    }

    /// Successors with positive multiplicity.
    pub fn successors(&self, from: &State) -> Vec<(State, u64)> {
        let mut out = Vec::new();
        match self {
            TransitionStructure::Finite { matrix, .. } => {
                for (j, &a) in matrix[from.local].iter().enumerate() {
                    if a > 0 {
                        out.push((State::finite(j), a));
                    }
                }
            }
            TransitionStructure::Banded { blocks, .. } => {
                for (d, b) in blocks {
                    for (j, &a) in b[from.local].iter().enumerate() {
                        if a > 0 {
                            out.push((State::new(from.cell + d, j), a));
                        }
                    }
                }
            }
        }
        out
    }

    /// Predecessors with positive multiplicity.
    pub fn predecessors(&self, to: &State) -> Vec<(State, u64)> {
        let mut out = Vec::new();
        match self {
            TransitionStructure::Finite { matrix, .. } => {
                for (i, row) in matrix.iter().enumerate() {
                    if row[to.local] > 0 {
                        out.push((State::finite(i), row[to.local]));
                    }
                }
            }
            TransitionStructure::Banded { blocks, .. } => {
                for (d, b) in blocks {
                    for (i, row) in b.iter().enumerate() {
                        if row[to.local] > 0 {
                            out.push((State::new(to.cell - d, i), row[to.local]));
                        }
                    }
                }
            }
        }
        out
    }

    /// Strong connectivity.
    ///
    /// Exact for finite structures. For banded structures this checks strong
    /// connectivity of the three-cell window `{-1, 0, 1}` with edges restricted
    /// to it, which suffices for the nearest-neighbour examples here but is not
    /// a decision procedure in general.
    pub fn is_irreducible(&self) -> bool {
        let g = match self {
            TransitionStructure::Finite { .. } => WindowGraph::new(self, 0, 0),
            TransitionStructure::Banded { .. } => WindowGraph::new(self, -1, 1),
        };
        g.strongly_connected()
    }
}

/// The structure restricted to the cells `lo..=hi`, with dense indices.
///
/// Edges leaving the window are dropped.
pub(crate) struct WindowGraph {
    pub lo: i64,
    pub s: usize,
    pub len: usize,
    pub succ: Vec<Vec<(usize, u64)>>,
    pub pred: Vec<Vec<(usize, u64)>>,
}

impl WindowGraph {
    pub fn new(ts: &TransitionStructure, lo: i64, hi: i64) -> Self {
        let (lo, hi) = if ts.is_finite() { (0, 0) } else { (lo, hi) };
        let s = ts.states_per_cell();
        let len = ((hi - lo + 1) as usize) * s;
        let mut succ = vec![Vec::new(); len];
        let mut pred = vec![Vec::new(); len];
        for (i, row) in succ.iter_mut().enumerate() {
            let from = State::new(lo + (i / s) as i64, i % s);
            for (to, a) in ts.successors(&from) {
                if to.cell < lo || to.cell > hi {
                    continue;
                }
                let j = ((to.cell - lo) as usize) * s + to.local;
                row.push((j, a));
                pred[j].push((i, a));
            }
        }
        WindowGraph {
            lo,
            s,
            len,
            succ,
            pred,
        }
    }

    /// Window large enough that every path of length `<= n` touching one of
    /// `anchors` at either end stays inside.
    pub fn around(ts: &TransitionStructure, anchors: &[State], n: usize) -> Self {
        let r = (n * ts.band()) as i64;
        let lo = anchors.iter().map(|a| a.cell).min().unwrap_or(0) - r;
        let hi = anchors.iter().map(|a| a.cell).max().unwrap_or(0) + r;
        Self::new(ts, lo, hi)
    }

    pub fn index(&self, st: &State) -> usize {
        ((st.cell - self.lo) as usize) * self.s + st.local
    }

    pub fn state(&self, i: usize) -> State {
        State::new(self.lo + (i / self.s) as i64, i % self.s)
    }

    fn reach(&self, start: usize, edges: &[Vec<(usize, u64)>]) -> usize {
        let mut seen = vec![false; self.len];
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        let mut count = 1;
        while let Some(i) = q.pop_front() {
            for &(j, _) in &edges[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    q.push_back(j);
                }
            }
        }
        count
    }

    fn strongly_connected(&self) -> bool {
        self.len > 0 && self.reach(0, &self.succ) == self.len && self.reach(0, &self.pred) == self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gamma_prime() -> TransitionStructure {
        TransitionStructure::scalar_band(&[(-1, 1), (0, 2), (1, 2)]).unwrap()
    }

    #[test]
    fn json_forms() {
        let g = gamma_prime();
        let js = serde_json::to_string(&g).unwrap();
        assert_eq!(
            js,
            r#"{"kind":"banded","states_per_cell":1,"band":1,"blocks":{"-1":[[1]],"0":[[2]],"1":[[2]]}}"#
        );
        assert_eq!(serde_json::from_str::<TransitionStructure>(&js).unwrap(), g);
        let f = TransitionStructure::full_shift(2);
        let js = serde_json::to_string(&f).unwrap();
        assert_eq!(js, r#"{"kind":"finite","states":["0","1"],"matrix":[[1,1],[1,1]]}"#);
        assert!(serde_json::from_str::<TransitionStructure>(
            r#"{"kind":"finite","states":["a"],"matrix":[[1,1]]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<TransitionStructure>(
            r#"{"kind":"banded","states_per_cell":1,"band":1,"blocks":{"2":[[1]]}}"#
        )
        .is_err());
    }

    #[test]
    fn neighbours_and_degrees() {
        let g = gamma_prime();
        let o = State::new(0, 0);
        let out: u64 = g.successors(&o).iter().map(|(_, a)| a).sum();
        let inn: u64 = g.predecessors(&o).iter().map(|(_, a)| a).sum();
        assert_eq!((out, inn), (5, 5));
        assert_eq!(g.entry(&State::new(3, 0), &State::new(2, 0)), 1);
    }

    #[test]
    fn irreducibility() {
        assert!(TransitionStructure::full_shift(2).is_irreducible());
        assert!(!TransitionStructure::from_matrix(vec![vec![1, 1], vec![0, 1]])
            .unwrap()
            .is_irreducible());
        assert!(gamma_prime().is_irreducible());
        assert!(!TransitionStructure::scalar_band(&[(1, 1)]).unwrap().is_irreducible());
    }

    #[test]
    fn state_parsing() {
        assert_eq!("(2,1)".parse::<State>().unwrap(), State::new(2, 1));
        assert_eq!("-3".parse::<State>().unwrap(), State::new(-3, 0));
        assert!("a,b".parse::<State>().is_err());
        let f = TransitionStructure::finite(vec!["L".into(), "R".into()], vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(f.parse_state("R").unwrap(), State::finite(1));
        assert!(f.parse_state("(0,5)").is_err());
    }
}
