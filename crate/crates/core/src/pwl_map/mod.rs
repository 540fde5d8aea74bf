//! Exact piecewise-linear interval maps, their lifts, and a small registry
//! of closed-form maps.

mod analytic;
mod conjugacy;
mod lift;
mod preimages;
#[cfg(test)]
mod properties;
mod variation;

use std::fmt;

use log::warn;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, q, to_f64, Q};

pub use analytic::AnalyticMap;
pub use conjugacy::{check_conjugacy, power_example, PowerReport, RealMap};
pub use lift::PeriodicLift;
pub(crate) use lift::{ceil_q, floor_q};
pub use preimages::{preimage_count, preimages, Invertible, Window};
pub use variation::{ln_q, variation_growth, IterVariation, VariationRow};

/// Default cap on the number of breakpoints produced by composition.
pub const DEFAULT_BREAKPOINT_CAP: usize = 1_000_000;

/// A continuous self-map of `[0,1]`, affine between consecutive breakpoints.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PwlJson", into = "PwlJson")]
pub struct PwlMap {
    breakpoints: Vec<Q>,
    values: Vec<Q>,
}

#[derive(Serialize, Deserialize)]
struct PwlJson {
    #[serde(with = "rational::serde_q_vec")]
    breakpoints: Vec<Q>,
    #[serde(with = "rational::serde_q_vec")]
    values: Vec<Q>,
}

impl TryFrom<PwlJson> for PwlMap {
    type Error = Error;

    fn try_from(raw: PwlJson) -> Result<Self> {
        PwlMap::new(raw.breakpoints, raw.values)
    }
}

impl From<PwlMap> for PwlJson {
    fn from(m: PwlMap) -> Self {
        PwlJson {
            breakpoints: m.breakpoints,
            values: m.values,
        }
    }
}

/// One affine piece `[x0, x1] -> [y0, y1]` (the values in domain order).
#[derive(Debug, Clone, Copy)]
pub struct Piece<'a> {
    pub x0: &'a Q,
    pub x1: &'a Q,
    pub y0: &'a Q,
    pub y1: &'a Q,
}

impl Piece<'_> {
    pub fn slope(&self) -> Q {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }

    pub fn contains_value(&self, y: &Q) -> bool {
        let (lo, hi) = order(self.y0, self.y1);
        lo <= y && y <= hi
    }

    /// The unique `x` in the piece with value `y`; the piece must be non-constant.
    pub fn solve(&self, y: &Q) -> Q {
        self.x0 + (y - self.y0) * (self.x1 - self.x0) / (self.y1 - self.y0)
    }

    pub fn at(&self, x: &Q) -> Q {
        self.y0 + (x - self.x0) * (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

pub(crate) fn order<'a>(a: &'a Q, b: &'a Q) -> (&'a Q, &'a Q) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl PwlMap {
    pub fn new(breakpoints: Vec<Q>, values: Vec<Q>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid("a PWL map needs at least two breakpoints"));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::invalid("breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if let Some(bad) = values.iter().find(|v| !rational::is_unit_interval(v)) {
            return Err(Error::invalid(format!("value {bad} is outside [0,1]")));
        }
        let map = PwlMap { breakpoints, values };
        if map.lipschitz_constant() < Q::one() {
            warn!("map is a uniform contraction (Lipschitz constant < 1); its invariant core is a point");
        }
        Ok(map)
    }

    /// Builds a map from `(x, f(x))` nodes.
    pub fn from_points(points: &[(Q, Q)]) -> Result<Self> {
        let (xs, ys) = points.iter().cloned().unzip();
        Self::new(xs, ys)
    }

    pub fn identity() -> Self {
        PwlMap {
            breakpoints: vec![Q::zero(), Q::one()],
            values: vec![Q::zero(), Q::one()],
        }
    }

    /// The full tent `(0,0), (1/2,1), (1,0)`.
    pub fn tent() -> Self {
        PwlMap {
            breakpoints: vec![Q::zero(), q(1, 2), Q::one()],
            values: vec![Q::zero(), Q::one(), Q::zero()],
        }
    }

    /// Two full branches with slopes `1/c` and `-1/(1-c)` meeting at `(c, 1)`.
    pub fn full_tent_at(c: Q) -> Result<Self> {
        Self::new(
            vec![Q::zero(), c, Q::one()],
            vec![Q::zero(), Q::one(), Q::zero()],
        )
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn num_pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn piece(&self, i: usize) -> Piece<'_> {
        Piece {
            x0: &self.breakpoints[i],
            x1: &self.breakpoints[i + 1],
            y0: &self.values[i],
            y1: &self.values[i + 1],
        }
    }

    pub fn pieces(&self) -> impl Iterator<Item = Piece<'_>> + '_ {
        (0..self.num_pieces()).map(move |i| self.piece(i))
    }

    /// Index of the piece containing `x` (the left one at interior breakpoints).
    pub fn piece_index(&self, x: &Q) -> usize {
        let k = self.breakpoints.partition_point(|b| b < x);
        k.saturating_sub(1).min(self.num_pieces() - 1)
    }

    pub fn eval(&self, x: &Q) -> Result<Q> {
        if !rational::is_unit_interval(x) {
            return Err(Error::OutOfDomain {
                x: x.to_string(),
                domain: "[0,1]".into(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Q) -> Q {
        self.piece(self.piece_index(x)).at(x)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| to_f64(b) < x);
        let i = k.saturating_sub(1).min(self.num_pieces() - 1);
        let p = self.piece(i);
        let (x0, x1, y0, y1) = (to_f64(p.x0), to_f64(p.x1), to_f64(p.y0), to_f64(p.y1));
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }

    /// Best Lipschitz constant: the largest absolute slope.
    pub fn lipschitz_constant(&self) -> Q {
        self.pieces()
            .map(|p| p.slope().abs())
            .max()
            .unwrap_or_else(Q::zero)
    }

    /// Total variation over `[0,1]`.
    pub fn total_variation(&self) -> Q {
        self.values
            .windows(2)
            .map(|w| (&w[1] - &w[0]).abs())
            .fold(Q::zero(), |a, b| a + b)
    }

    /// Variation of the map restricted to `[0, x]`.
    pub fn variation_on_prefix(&self, x: &Q) -> Result<Q> {
        let fx = self.eval(x)?;
        let j = self.piece_index(x);
        let full = self.values[..=j]
            .windows(2)
            .map(|w| (&w[1] - &w[0]).abs())
            .fold(Q::zero(), |a, b| a + b);
        Ok(full + (fx - &self.values[j]).abs())
    }

    /// Variation on `[a, b]`, `a <= b`.
    pub fn variation_on(&self, a: &Q, b: &Q) -> Result<Q> {
        Ok(self.variation_on_prefix(b)? - self.variation_on_prefix(a)?)
    }

    /// `[min f, max f]` over `[a, b]`.
    pub fn image_of(&self, a: &Q, b: &Q) -> Result<(Q, Q)> {
        let fa = self.eval(a)?;
        let fb = self.eval(b)?;
        let mut lo = fa.clone().min(fb.clone());
        let mut hi = fa.max(fb);
        for (x, y) in self.breakpoints.iter().zip(&self.values) {
            if a < x && x < b {
                if *y < lo {
                    lo = y.clone();
                }
                if *y > hi {
                    hi = y.clone();
                }
            }
        }
        Ok((lo, hi))
    }

    /// `self ∘ inner` as an exact PWL map.
    pub fn compose(&self, inner: &PwlMap, cap: usize) -> Result<PwlMap> {
        let mut xs: Vec<Q> = Vec::with_capacity(inner.breakpoints.len());
        for (i, p) in inner.pieces().enumerate() {
            if i == 0 {
                xs.push(p.x0.clone());
            }
            if p.y0 != p.y1 {
                let (lo, hi) = order(p.y0, p.y1);
                let start = self.breakpoints.partition_point(|b| b <= lo);
                let end = self.breakpoints.partition_point(|b| b < hi);
                let inner_pts = self.breakpoints[start..end].iter().map(|b| p.solve(b));
                if p.y0 < p.y1 {
                    xs.extend(inner_pts);
                } else {
                    let mut v: Vec<Q> = inner_pts.collect();
                    v.reverse();
                    xs.extend(v);
                }
            }
            xs.push(p.x1.clone());
            if xs.len() > cap {
                return Err(Error::ResourceCap {
                    what: "breakpoints",
                    count: xs.len(),
                    cap,
                });
            }
        }
        let values = xs
            .iter()
            .map(|x| self.eval_unchecked(&inner.eval_unchecked(x)))
            .collect();
        Ok(PwlMap {
            breakpoints: xs,
            values,
        })
    }

    /// `f^n` with the default breakpoint cap.
    pub fn iterate(&self, n: usize) -> Result<PwlMap> {
        self.iterate_with_cap(n, DEFAULT_BREAKPOINT_CAP)
    }

    pub fn iterate_with_cap(&self, n: usize, cap: usize) -> Result<PwlMap> {
        let mut acc = PwlMap::identity();
        for _ in 0..n {
            // f^{k+1} = f^k ∘ f keeps the breakpoints as preimages of those of f
            acc = acc.compose(self, cap)?;
        }
        Ok(acc)
    }

    /// Drops interior breakpoints where the slope does not change.
    pub fn simplified(&self) -> PwlMap {
        let mut xs = vec![self.breakpoints[0].clone()];
        let mut ys = vec![self.values[0].clone()];
        for i in 1..self.breakpoints.len() - 1 {
            let left = self.piece(i - 1).slope();
            let right = self.piece(i).slope();
            if left != right {
                xs.push(self.breakpoints[i].clone());
                ys.push(self.values[i].clone());
            }
        }
        xs.push(self.breakpoints.last().unwrap().clone());
        ys.push(self.values.last().unwrap().clone());
        PwlMap {
            breakpoints: xs,
            values: ys,
        }
    }

    /// Exact one-step preimages of `y`, sorted and without repeats.
    pub fn preimages_once(&self, y: &Q) -> Result<Vec<Q>> {
        let mut out: Vec<Q> = Vec::new();
        for p in self.pieces() {
            if !p.contains_value(y) {
                continue;
            }
            if p.y0 == p.y1 {
                return Err(Error::InfinitePreimages(y.to_string()));
            }
            let x = p.solve(y);
            if out.last() != Some(&x) {
                out.push(x);
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for PwlMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PwlMap[")?;
        for (i, (x, y)) in self.breakpoints.iter().zip(&self.values).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({x}, {y})")?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn f_a() -> PwlMap {
        PwlMap::full_tent_at(q(3, 5)).unwrap()
    }

    #[test]
    fn tent_eval_quarter() {
        assert_eq!(PwlMap::tent().eval(&q(1, 4)).unwrap(), q(1, 2));
        assert!(PwlMap::tent().eval(&q(5, 4)).is_err());
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(PwlMap::new(vec![qi(0)], vec![qi(0)]).is_err());
        assert!(PwlMap::new(vec![qi(0), q(1, 2)], vec![qi(0), qi(1)]).is_err());
        assert!(PwlMap::new(vec![qi(0), qi(1)], vec![qi(0), qi(2)]).is_err());
        assert!(PwlMap::new(vec![qi(0), q(1, 2), q(1, 2), qi(1)], vec![qi(0); 4]).is_err());
    }

    #[test]
    fn double_tent() {
        let t2 = PwlMap::tent().iterate(2).unwrap();
        assert_eq!(
            t2.breakpoints(),
            &[qi(0), q(1, 4), q(1, 2), q(3, 4), qi(1)]
        );
        assert_eq!(t2.values(), &[qi(0), qi(1), qi(0), qi(1), qi(0)]);
    }

    #[test]
    fn zeroth_iterate_is_identity() {
        assert_eq!(f_a().iterate(0).unwrap(), PwlMap::identity());
    }

    #[test]
    fn f_a_second_iterate_has_four_full_laps() {
        let g = f_a().iterate(2).unwrap();
        assert_eq!(
            g.breakpoints(),
            &[qi(0), q(9, 25), q(3, 5), q(19, 25), qi(1)]
        );
        assert_eq!(g.total_variation(), qi(4));
    }

    #[test]
    fn variations() {
        let t = PwlMap::tent();
        assert_eq!(t.total_variation(), qi(2));
        assert_eq!(t.variation_on_prefix(&q(3, 4)).unwrap(), q(3, 2));
        assert_eq!(PwlMap::identity().total_variation(), qi(1));
        assert_eq!(t.variation_on(&q(1, 4), &q(3, 4)).unwrap(), qi(1));
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(PwlMap::tent().lipschitz_constant(), qi(2));
        assert_eq!(f_a().lipschitz_constant(), q(5, 2));
        assert_eq!(PwlMap::identity().lipschitz_constant(), qi(1));
    }

    #[test]
    fn breakpoint_cap_is_a_resource_error() {
        let err = PwlMap::tent().iterate_with_cap(12, 1000).unwrap_err();
        assert!(err.is_resource_cap());
    }

    #[test]
    fn simplify_merges_collinear_pieces() {
        let m = PwlMap::from_points(&[(qi(0), qi(0)), (q(1, 3), q(1, 3)), (qi(1), qi(1))]).unwrap();
        assert_eq!(m.simplified(), PwlMap::identity());
    }

    #[test]
    fn constant_piece_has_infinite_preimages() {
        let m = PwlMap::from_points(&[
            (qi(0), qi(0)),
            (q(1, 3), q(1, 2)),
            (q(2, 3), q(1, 2)),
            (qi(1), qi(1)),
        ])
        .unwrap();
        assert!(matches!(
            m.preimages_once(&q(1, 2)),
            Err(Error::InfinitePreimages(_))
        ));
        assert_eq!(m.preimages_once(&q(1, 4)).unwrap(), vec![q(1, 6)]);
    }

    #[test]
    fn json_shape() {
        let js = serde_json::to_string(&PwlMap::tent()).unwrap();
        assert_eq!(js, r#"{"breakpoints":["0","1/2","1"],"values":["0","1","0"]}"#);
        let back: PwlMap = serde_json::from_str(&js).unwrap();
        assert_eq!(back, PwlMap::tent());
        assert!(serde_json::from_str::<PwlMap>(r#"{"breakpoints":["0","1"],"values":["0","3/2"]}"#).is_err());
    }
}
