use num_traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pwl_map::{AnalyticMap, PeriodicLift, PwlMap};
use crate::rational::{self, Q};
use crate::table::MonotoneTable;

/// Anything that can be evaluated for a conjugacy residual.
///
/// Maps that are exact on rationals override [`RealMap::apply_exact`]; when all
/// three maps in a residual check are exact the residual is computed exactly.
pub trait RealMap {
    fn apply_f64(&self, x: f64) -> f64;

    fn apply_exact(&self, _x: &Q) -> Option<Q> {
        None
    }
}

impl RealMap for PwlMap {
    fn apply_f64(&self, x: f64) -> f64 {
        self.eval_f64(x)
    }

    fn apply_exact(&self, x: &Q) -> Option<Q> {
        self.eval(x).ok()
    }
}

impl RealMap for PeriodicLift {
    fn apply_f64(&self, x: f64) -> f64 {
        self.eval_f64(x)
    }

    fn apply_exact(&self, x: &Q) -> Option<Q> {
        Some(self.eval(x))
    }
}

impl RealMap for AnalyticMap {
    fn apply_f64(&self, x: f64) -> f64 {
        self.eval_unchecked(x)
    }
}

impl RealMap for MonotoneTable {
    fn apply_f64(&self, x: f64) -> f64 {
        self.eval_f64(x)
    }

    fn apply_exact(&self, x: &Q) -> Option<Q> {
        self.eval(x).ok()
    }
}

/// `sup` over the grid of `|ψ(f(x)) − g(ψ(x))|`.
pub fn check_conjugacy(f: &dyn RealMap, g: &dyn RealMap, psi: &dyn RealMap, grid: &[Q]) -> f64 {
    grid.iter()
        .map(|x| residual_at(f, g, psi, x))
        .fold(0.0, f64::max)
}

/// Result of checking `x^2` against `x^t` through `psi_t`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub f: AnalyticMap,
    pub g: AnalyticMap,
    pub psi: AnalyticMap,
    pub grid_points: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Residual of `psi_t ∘ x^2 = x^t ∘ psi_t` on the interior grid `k / (points + 1)`.
pub fn power_example(t: f64, points: usize, tolerance: f64) -> Result<PowerReport> {
    if points == 0 {
        return Err(Error::invalid("grid needs at least one point"));
    }
    let f = AnalyticMap::power(2.0)?;
    let g = AnalyticMap::power(t)?;
    let psi = AnalyticMap::psi_t(t)?;
    let denom = i64::try_from(points + 1).map_err(|_| Error::invalid("grid too large"))?;
    let grid: Vec<Q> = (1..denom).map(|k| rational::q(k, denom)).collect();
    let residual = check_conjugacy(&f, &g, &psi, &grid);
    Ok(PowerReport {
        f,
        g,
        psi,
        grid_points: points,
        residual,
        tolerance,
        pass: residual < tolerance,
    })
}

fn residual_at(f: &dyn RealMap, g: &dyn RealMap, psi: &dyn RealMap, x: &Q) -> f64 {
    let exact = (|| {
        let lhs = psi.apply_exact(&f.apply_exact(x)?)?;
        let rhs = g.apply_exact(&psi.apply_exact(x)?)?;
        Some((lhs - rhs).abs())
    })();
    match exact {
        Some(r) => rational::to_f64(&r),
        None => {
            let xf = rational::to_f64(x);
            (psi.apply_f64(f.apply_f64(xf)) - g.apply_f64(psi.apply_f64(xf))).abs()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn grid(n: i64) -> Vec<Q> {
        (1..n).map(|k| q(k, n)).collect()
    }

    #[test]
    fn power_maps_conjugate_by_psi() {
        let f = AnalyticMap::power(2.0).unwrap();
        let g = AnalyticMap::power(4.0).unwrap();
        let psi = AnalyticMap::psi_t(4.0).unwrap();
        assert!(check_conjugacy(&f, &g, &psi, &grid(1000)) < 1e-12);
    }

    #[test]
    fn power_example_report() {
        let r = power_example(4.0, 1000, 1e-12).unwrap();
        assert!(r.pass);
        assert_eq!(r.grid_points, 1000);
        assert!(power_example(4.0, 0, 1e-12).is_err());
    }

    #[test]
    fn tent_with_identity_is_exact_zero() {
        let t = PwlMap::tent();
        let id = MonotoneTable::identity();
        assert_eq!(check_conjugacy(&t, &t, &id, &grid(64)), 0.0);
    }

    #[test]
    fn wrong_conjugacy_is_detected() {
        let f = AnalyticMap::power(2.0).unwrap();
        let g = AnalyticMap::power(3.0).unwrap();
        let psi = AnalyticMap::psi_t(4.0).unwrap();
        assert!(check_conjugacy(&f, &g, &psi, &grid(100)) > 1e-3);
    }
}
