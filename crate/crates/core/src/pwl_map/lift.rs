use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, qi, Q};

/// A degree-one piecewise-linear map of the real line.
///
/// One cell of turning data `(offset, value)` means `F(z + offset) = z + value`
/// for every integer `z`; `F` is affine between consecutive turning points,
/// including from the last turning point of cell `z` to the first of `z + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LiftJson", into = "LiftJson")]
pub struct PeriodicLift {
    turning: Vec<(Q, Q)>,
}

#[derive(Serialize, Deserialize)]
struct LiftJson {
    #[serde(with = "rational::serde_q_pairs")]
    turning: Vec<(Q, Q)>,
}

impl TryFrom<LiftJson> for PeriodicLift {
    type Error = Error;

    fn try_from(raw: LiftJson) -> Result<Self> {
        PeriodicLift::new(raw.turning)
    }
}

impl From<PeriodicLift> for LiftJson {
    fn from(l: PeriodicLift) -> Self {
        LiftJson { turning: l.turning }
    }
}

pub(crate) fn floor_q(x: &Q) -> i64 {
    let f = x.numer().div_floor(x.denom());
    i64::try_from(f).expect("cell index fits in i64")
}

pub(crate) fn ceil_q(x: &Q) -> i64 {
    let f = x.numer().div_ceil(x.denom());
    i64::try_from(f).expect("cell index fits in i64")
}

impl PeriodicLift {
    pub fn new(turning: Vec<(Q, Q)>) -> Result<Self> {
        if turning.is_empty() {
            return Err(Error::invalid("a periodic lift needs at least one turning point"));
        }
        if turning
            .iter()
            .any(|(o, _)| o.is_negative() || *o >= Q::one())
        {
            return Err(Error::invalid("turning offsets must lie in [0,1)"));
        }
        if turning.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("turning offsets must be strictly increasing"));
        }
        Ok(PeriodicLift { turning })
    }

    /// The lift with turning points `z -> z - 1` and `z + 3/5 -> z + 2`.
    pub fn gap_example() -> Self {
        PeriodicLift {
            turning: vec![(Q::zero(), qi(-1)), (rational::q(3, 5), qi(2))],
        }
    }

    pub fn turning(&self) -> &[(Q, Q)] {
        &self.turning
    }

    /// Number of affine segments per cell.
    pub fn segments_per_cell(&self) -> usize {
        self.turning.len()
    }

    /// Segment `i` of cell `z` as `((x0, y0), (x1, y1))`.
    pub fn segment(&self, z: i64, i: usize) -> ((Q, Q), (Q, Q)) {
        let zq = qi(z);
        let (o0, v0) = &self.turning[i];
        let start = (&zq + o0, &zq + v0);
        let end = if i + 1 < self.turning.len() {
            let (o1, v1) = &self.turning[i + 1];
            (&zq + o1, &zq + v1)
        } else {
            let (o1, v1) = &self.turning[0];
            (&zq + Q::one() + o1, &zq + Q::one() + v1)
        };
        (start, end)
    }

    /// The `(cell, segment)` whose closed span contains `x` (leftmost on ties).
    fn locate(&self, x: &Q) -> (i64, usize) {
        let z = floor_q(x);
        let t = x - qi(z);
        let first = &self.turning[0].0;
        if t < *first {
            return (z - 1, self.turning.len() - 1);
        }
        let k = self.turning.partition_point(|(o, _)| *o <= t);
        (z, k - 1)
    }

    pub fn eval(&self, x: &Q) -> Q {
        let (z, i) = self.locate(x);
        let ((x0, y0), (x1, y1)) = self.segment(z, i);
        &y0 + (x - &x0) * (&y1 - &y0) / (&x1 - &x0)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let xq = rational::from_f64(x).unwrap_or_else(Q::zero);
        rational::to_f64(&self.eval(&xq))
    }

    pub fn lipschitz_constant(&self) -> Q {
        (0..self.turning.len())
            .map(|i| {
                let ((x0, y0), (x1, y1)) = self.segment(0, i);
                ((y1 - y0) / (x1 - x0)).abs()
            })
            .max()
            .unwrap_or_else(Q::zero)
    }

    /// All real solutions of `F(x) = y`, sorted and without repeats.
    pub fn preimages_once(&self, y: &Q) -> Result<Vec<Q>> {
        let mut out = Vec::new();
        for i in 0..self.turning.len() {
            let ((x0, y0), (x1, y1)) = self.segment(0, i);
            if y0 == y1 {
                // constant segment: a whole interval maps to y when y is hit
                let hit = (y - &y0).is_integer();
                if hit {
                    return Err(Error::InfinitePreimages(y.to_string()));
                }
                continue;
            }
            let (lo, hi) = if y0 < y1 { (&y0, &y1) } else { (&y1, &y0) };
            // F(z + s) = z + F(s) on this segment, so solve for each shift z
            let z_min = ceil_q(&(y - hi));
            let z_max = floor_q(&(y - lo));
            for z in z_min..=z_max {
                let target = y - qi(z);
                let x = &x0 + (&target - &y0) * (&x1 - &x0) / (&y1 - &y0);
                out.push(x + qi(z));
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn gap_lift_values() {
        let f = PeriodicLift::gap_example();
        assert_eq!(f.eval(&qi(0)), qi(-1));
        assert_eq!(f.eval(&q(3, 5)), qi(2));
        assert_eq!(f.eval(&qi(1)), qi(0));
        assert_eq!(f.eval(&q(-2, 5)), qi(1));
        assert_eq!(f.eval(&q(13, 5)), qi(4));
        assert_eq!(f.eval(&q(3, 10)), q(1, 2));
    }

    #[test]
    fn degree_one() {
        let f = PeriodicLift::gap_example();
        for k in -7..7 {
            let x = q(k, 7);
            assert_eq!(f.eval(&(&x + qi(1))), f.eval(&x) + qi(1));
        }
    }

    #[test]
    fn slopes_are_five() {
        let f = PeriodicLift::gap_example();
        for i in 0..2 {
            let ((x0, y0), (x1, y1)) = f.segment(0, i);
            assert_eq!(((y1 - y0) / (x1 - x0)).abs(), qi(5));
        }
        assert_eq!(f.lipschitz_constant(), qi(5));
    }

    #[test]
    fn five_preimages_of_generic_point() {
        let f = PeriodicLift::gap_example();
        let pre = f.preimages_once(&q(3, 10)).unwrap();
        assert_eq!(pre.len(), 5);
        for p in &pre {
            assert_eq!(f.eval(p), q(3, 10));
        }
    }

    #[test]
    fn rejects_bad_offsets() {
        assert!(PeriodicLift::new(vec![]).is_err());
        assert!(PeriodicLift::new(vec![(qi(1), qi(0))]).is_err());
        assert!(PeriodicLift::new(vec![(q(1, 2), qi(0)), (q(1, 4), qi(1))]).is_err());
    }

    #[test]
    fn json_shape() {
        let js = serde_json::to_string(&PeriodicLift::gap_example()).unwrap();
        assert_eq!(js, r#"{"turning":[["0","-1"],["3/5","2"]]}"#);
        let back: PeriodicLift = serde_json::from_str(&js).unwrap();
        assert_eq!(back, PeriodicLift::gap_example());
    }
}
