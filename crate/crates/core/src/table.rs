//! Strictly increasing tables `(x, ψ(x))` standing in for homeomorphisms of `[0,1]`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, to_f64, Q};

/// A piecewise-affine homeomorphism of `[0,1]` given by its nodes.
///
/// Both coordinates are strictly increasing; the first node is `(0,0)` and the
/// last is `(1,1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct MonotoneTable {
    xs: Vec<Q>,
    ys: Vec<Q>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    #[serde(with = "rational::serde_q_pairs")]
    pairs: Vec<(Q, Q)>,
}

impl TryFrom<TableJson> for MonotoneTable {
    type Error = Error;

    fn try_from(raw: TableJson) -> Result<Self> {
        MonotoneTable::from_pairs(raw.pairs)
    }
}

impl From<MonotoneTable> for TableJson {
    fn from(t: MonotoneTable) -> Self {
        TableJson {
            pairs: t.xs.into_iter().zip(t.ys).collect(),
        }
    }
}

impl MonotoneTable {
    pub fn new(xs: Vec<Q>, ys: Vec<Q>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::invalid("table needs matching coordinates and at least two nodes"));
        }
        if !xs[0].is_zero() || !ys[0].is_zero() {
            return Err(Error::invalid("table must start at (0,0)"));
        }
        if !xs[xs.len() - 1].is_one() || !ys[ys.len() - 1].is_one() {
            return Err(Error::invalid("table must end at (1,1)"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) || ys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("table is not strictly increasing"));
        }
        Ok(MonotoneTable { xs, ys })
    }

    pub fn from_pairs(pairs: Vec<(Q, Q)>) -> Result<Self> {
        let (xs, ys) = pairs.into_iter().unzip();
        Self::new(xs, ys)
    }

    pub fn identity() -> Self {
        MonotoneTable {
            xs: vec![Q::zero(), Q::one()],
            ys: vec![Q::zero(), Q::one()],
        }
    }

    /// The identity sampled at the given points (0 and 1 are added).
    pub fn identity_on(points: &[Q]) -> Result<Self> {
        let mut xs: Vec<Q> = points.to_vec();
        xs.push(Q::zero());
        xs.push(Q::one());
        xs.sort();
        xs.dedup();
        Self::new(xs.clone(), xs)
    }

    pub fn xs(&self) -> &[Q] {
        &self.xs
    }

    pub fn ys(&self) -> &[Q] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Q, &Q)> {
        self.xs.iter().zip(&self.ys)
    }

    /// Exact table value at a node.
    pub fn lookup(&self, x: &Q) -> Option<&Q> {
        self.xs.binary_search(x).ok().map(|i| &self.ys[i])
    }

    /// Piecewise-affine interpolation.
    pub fn eval(&self, x: &Q) -> Result<Q> {
        interpolate(&self.xs, &self.ys, x)
    }

    pub fn inverse(&self, y: &Q) -> Result<Q> {
        interpolate(&self.ys, &self.xs, y)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|b| to_f64(b) < x);
        let i = k.clamp(1, self.xs.len() - 1);
        let (x0, x1) = (to_f64(&self.xs[i - 1]), to_f64(&self.xs[i]));
        let (y0, y1) = (to_f64(&self.ys[i - 1]), to_f64(&self.ys[i]));
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }
}

fn interpolate(xs: &[Q], ys: &[Q], x: &Q) -> Result<Q> {
    if !rational::is_unit_interval(x) {
        return Err(Error::OutOfDomain {
            x: x.to_string(),
            domain: "[0,1]".into(),
        });
    }
    match xs.binary_search(x) {
        Ok(i) => Ok(ys[i].clone()),
        Err(i) => {
            let (x0, x1, y0, y1) = (&xs[i - 1], &xs[i], &ys[i - 1], &ys[i]);
            Ok(y0 + (x - x0) * (y1 - y0) / (x1 - x0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn rejects_non_monotone() {
        assert!(MonotoneTable::new(vec![qi(0), q(1, 2), qi(1)], vec![qi(0), qi(1), qi(1)]).is_err());
        assert!(MonotoneTable::new(vec![qi(0), qi(1)], vec![q(1, 2), qi(1)]).is_err());
    }

    #[test]
    fn interpolates_and_inverts() {
        let t = MonotoneTable::new(vec![qi(0), q(1, 2), qi(1)], vec![qi(0), q(1, 4), qi(1)]).unwrap();
        assert_eq!(t.eval(&q(1, 4)).unwrap(), q(1, 8));
        assert_eq!(t.inverse(&q(1, 8)).unwrap(), q(1, 4));
        assert_eq!(t.eval(&q(3, 4)).unwrap(), q(5, 8));
        assert!((t.eval_f64(0.75) - 0.625).abs() < 1e-15);
        assert!(t.eval(&qi(2)).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = MonotoneTable::identity_on(&[q(1, 3)]).unwrap();
        let js = serde_json::to_string(&t).unwrap();
        assert_eq!(js, r#"{"pairs":[["0","0"],["1/3","1/3"],["1","1"]]}"#);
        assert_eq!(serde_json::from_str::<MonotoneTable>(&js).unwrap(), t);
    }
}
