//! Conjugating a piecewise-linear map to one with Lipschitz constant `ν + ε`.
//!
//! The homeomorphism is the truncated series
//! `φ_N(x) = Σ_{n=0}^{N} Var f^n|_{[0,x]} / (ν+ε)^n`, normalized so that
//! `φ_N(1) = 1`. It is sampled on a table `T` (the breakpoints of `f^M` plus
//! the forward orbit of the turning values), and the conjugate `g` is the
//! piecewise-affine map through `(φ(x), φ(f(x)))`, `x ∈ T`.
//!
//! For adjacent table nodes `u < v`, with `c = ν+ε`,
//!
//! ```text
//! |φ_N(f v) − φ_N(f u)| ≤ c · (φ_N(v) − φ_N(u) − (v − u) + Var f^{N+1}|_{[u,v]} / c^{N+1})
//! ```
//!
//! so the slope of `g` over `[φ(u), φ(v)]` is at most `c` whenever
//! `Var f^{N+1}|_{[u,v]} ≤ c^{N+1} (v − u)`. The table depth `M` is chosen as
//! the largest depth at which that holds for every adjacent pair; a finer
//! table cannot help, because near a repelling fixed point any piecewise-affine
//! conjugacy keeps the original slope.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pwl_map::{IterVariation, PwlMap};
use crate::rational::{self, Q};
use crate::table::MonotoneTable;

#[derive(Debug, Clone)]
pub struct PhiOptions {
    /// Fixed table depth `M`; `None` picks the deepest certified one.
    pub table_depth: Option<usize>,
    /// Largest number of breakpoints of `f^M` considered for the table.
    pub table_cap: usize,
    /// Longest forward orbit of turning values added to the table.
    pub orbit_cap: usize,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions {
            table_depth: None,
            table_cap: 1 << 14,
            orbit_cap: 4096,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiConstruction {
    pub table: MonotoneTable,
    pub series_depth: usize,
    pub table_depth: usize,
    /// Every adjacent table pair satisfies the truncation certificate.
    pub certified: bool,
    /// The table contains the image of each of its nodes.
    pub closed: bool,
    /// `Σ_{n>N} (est/(ν+ε))^n` with `est = (Var f^N)^{1/N}`.
    pub tail_bound: f64,
}

/// Builds the normalized `φ_N` table with default options.
pub fn phi_construct(f: &PwlMap, nu: &Q, epsilon: &Q, n: usize) -> Result<PhiConstruction> {
    phi_construct_with(f, nu, epsilon, n, &PhiOptions::default())
}

pub fn phi_construct_with(
    f: &PwlMap,
    nu: &Q,
    epsilon: &Q,
    n: usize,
    opts: &PhiOptions,
) -> Result<PhiConstruction> {
    if !epsilon.is_positive() {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if !nu.is_positive() {
        return Err(Error::invalid("nu must be positive"));
    }
    let c = nu + epsilon;
    let mut iv = IterVariation::new(f);

    let mut nu_pow = Q::one();
    for k in 1..=n {
        nu_pow *= nu;
        let var = iv.total(k);
        if var > nu_pow {
            return Err(Error::invalid(format!(
                "nu = {nu} is below the variation growth: Var f^{k} = {var} > nu^{k}"
            )));
        }
    }

    let (points, depth, certified, closed) = match opts.table_depth {
        Some(m) => {
            let (pts, closed) = table_points(f, m.max(1), opts)?;
            let ok = certificate_holds(&mut iv, &pts, &c, n)?;
            (pts, m.max(1), ok, closed)
        }
        None => choose_table(f, &mut iv, &c, n, opts)?,
    };

    let inv_c = c.recip();
    let mut weights = Vec::with_capacity(n + 1);
    let mut w = Q::one();
    for _ in 0..=n {
        weights.push(w.clone());
        w *= &inv_c;
    }
    let mut raw = Vec::with_capacity(points.len());
    for x in &points {
        let mut acc = Q::zero();
        for (k, wk) in weights.iter().enumerate() {
            acc += iv.on_prefix(k, x)? * wk;
        }
        raw.push(acc);
    }
    let scale = raw.last().cloned().unwrap_or_else(Q::one);
    let ys: Vec<Q> = raw.into_iter().map(|v| v / &scale).collect();
    let table = MonotoneTable::new(points, ys)?;

    let tail_bound = tail_bound(&mut iv, n, &c);
    Ok(PhiConstruction {
        table,
        series_depth: n,
        table_depth: depth,
        certified,
        closed,
        tail_bound,
    })
}

fn tail_bound(iv: &mut IterVariation<'_>, n: usize, c: &Q) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let est = (crate::pwl_map::ln_q(&iv.total(n)) / n as f64).exp();
    let r = est / rational::to_f64(c);
    if r >= 1.0 {
        f64::INFINITY
    } else {
        r.powi(n as i32 + 1) / (1.0 - r)
    }
}

/// Breakpoints of `f^m` together with the forward orbit of the turning values.
fn table_points(f: &PwlMap, m: usize, opts: &PhiOptions) -> Result<(Vec<Q>, bool)> {
    let fm = f.iterate_with_cap(m, opts.table_cap)?;
    let mut set: BTreeSet<Q> = fm.breakpoints().iter().cloned().collect();
    let mut frontier: Vec<Q> = f.values().to_vec();
    let mut added = 0usize;
    let mut closed = true;
    while let Some(y) = frontier.pop() {
        if set.insert(y.clone()) {
            added += 1;
            if added > opts.orbit_cap {
                closed = false;
                break;
            }
            frontier.push(f.eval_unchecked(&y));
        }
    }
    Ok((set.into_iter().collect(), closed))
}

fn certificate_holds(iv: &mut IterVariation<'_>, points: &[Q], c: &Q, n: usize) -> Result<bool> {
    let c_pow = num_traits::pow(c.clone(), n + 1);
    let mut prev = iv.on_prefix(n + 1, &points[0])?;
    for w in points.windows(2) {
        let cur = iv.on_prefix(n + 1, &w[1])?;
        if &cur - &prev > &c_pow * (&w[1] - &w[0]) {
            return Ok(false);
        }
        prev = cur;
    }
    Ok(true)
}

fn choose_table(
    f: &PwlMap,
    iv: &mut IterVariation<'_>,
    c: &Q,
    n: usize,
    opts: &PhiOptions,
) -> Result<(Vec<Q>, usize, bool, bool)> {
    let mut best: Option<(Vec<Q>, usize, bool)> = None;
    for m in 1..=n.max(1) {
        let (pts, closed) = match table_points(f, m, opts) {
            Ok(t) => t,
            Err(e) if e.is_resource_cap() => break,
            Err(e) => return Err(e),
        };
        if certificate_holds(iv, &pts, c, n)? {
            best = Some((pts, m, closed));
        } else {
            break;
        }
    }
    match best {
        Some((pts, m, closed)) => Ok((pts, m, true, closed)),
        None => {
            let (pts, closed) = table_points(f, 1, opts)?;
            Ok((pts, 1, false, closed))
        }
    }
}

/// The piecewise-affine map through `(φ(x), φ(f(x)))` for every table node `x`.
///
/// Nodes whose image is not itself a node use the interpolated `φ`.
pub fn conjugate_by(f: &PwlMap, phi: &MonotoneTable) -> Result<PwlMap> {
    for b in f.breakpoints() {
        if phi.lookup(b).is_none() {
            return Err(Error::MissingCoverage(format!("breakpoint {b} of f")));
        }
    }
    let mut values = Vec::with_capacity(phi.len());
    for x in phi.xs() {
        let fx = f.eval(x)?;
        let v = match phi.lookup(&fx) {
            Some(v) => v.clone(),
            None => phi.eval(&fx)?,
        };
        values.push(v);
    }
    PwlMap::new(phi.ys().to_vec(), values)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationConjugacyResult {
    pub phi: MonotoneTable,
    pub g: PwlMap,
    #[serde(with = "rational::serde_q")]
    pub epsilon: Q,
    pub truncation: usize,
    pub table_depth: usize,
    pub certified: bool,
    #[serde(rename = "lip", with = "rational::serde_q")]
    pub lip_g: Q,
    pub tail_bound: f64,
}

/// `phi_construct` followed by `conjugate_by`.
pub fn variation_conjugacy(f: &PwlMap, nu: &Q, epsilon: &Q, n: usize) -> Result<VariationConjugacyResult> {
    variation_conjugacy_with(f, nu, epsilon, n, &PhiOptions::default())
}

pub fn variation_conjugacy_with(
    f: &PwlMap,
    nu: &Q,
    epsilon: &Q,
    n: usize,
    opts: &PhiOptions,
) -> Result<VariationConjugacyResult> {
    let phi = phi_construct_with(f, nu, epsilon, n, opts)?;
    let g = conjugate_by(f, &phi.table)?;
    Ok(VariationConjugacyResult {
        lip_g: g.lipschitz_constant(),
        phi: phi.table,
        g,
        epsilon: epsilon.clone(),
        truncation: n,
        table_depth: phi.table_depth,
        certified: phi.certified,
        tail_bound: phi.tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use num_traits::Signed;

    fn f_a() -> PwlMap {
        PwlMap::full_tent_at(q(3, 5)).unwrap()
    }

    #[test]
    fn identity_gives_identity_table() {
        let phi = phi_construct(&PwlMap::identity(), &qi(1), &q(1, 3), 3).unwrap();
        for (x, y) in phi.table.pairs() {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn tent_one_term_by_hand() {
        let opts = PhiOptions {
            table_depth: Some(1),
            ..PhiOptions::default()
        };
        let phi = phi_construct_with(&PwlMap::tent(), &qi(2), &q(1, 2), 1, &opts).unwrap();
        // (1/2 + 1/(5/2)) / (1 + 2/(5/2))
        assert_eq!(phi.table.lookup(&q(1, 2)).unwrap(), &q(1, 2));
    }

    #[test]
    fn f_a_table_is_strictly_increasing() {
        let phi = phi_construct(&f_a(), &qi(2), &q(1, 10), 30).unwrap();
        assert_eq!(phi.table.ys().last().unwrap(), &qi(1));
        assert!(phi.certified);
        assert!(phi.closed);
        assert!(phi.table_depth >= 1);
    }

    #[test]
    fn nu_below_growth_is_rejected() {
        assert!(phi_construct(&PwlMap::tent(), &q(19, 10), &q(1, 10), 5).is_err());
        assert!(phi_construct(&PwlMap::tent(), &qi(2), &qi(0), 5).is_err());
    }

    #[test]
    fn conjugate_by_identity_keeps_tent() {
        let id = MonotoneTable::identity_on(&[q(1, 2)]).unwrap();
        assert_eq!(conjugate_by(&PwlMap::tent(), &id).unwrap(), PwlMap::tent());
        assert!(matches!(
            conjugate_by(&PwlMap::tent(), &MonotoneTable::identity()),
            Err(Error::MissingCoverage(_))
        ));
    }

    #[test]
    fn f_a_conjugate_beats_its_slope() {
        let r = variation_conjugacy(&f_a(), &qi(2), &q(1, 10), 30).unwrap();
        assert!(r.lip_g <= q(21, 10), "lip = {}", r.lip_g);
        assert!(r.lip_g < q(5, 2));
    }

    #[test]
    fn constructed_maps_respect_lipschitz_power() {
        let cases = [
            (f_a(), qi(2), q(1, 10), 30),
            (PwlMap::tent(), qi(2), q(1, 2), 20),
            (PwlMap::full_tent_at(q(1, 3)).unwrap(), qi(2), q(1, 4), 16),
        ];
        for (f, nu, eps, n) in cases {
            let r = variation_conjugacy(&f, &nu, &eps, n).unwrap();
            let mut iv = IterVariation::new(&r.g);
            for k in 1..=6 {
                assert!(iv.total(k) <= num_traits::pow(r.lip_g.clone(), k));
            }
        }
    }

    #[test]
    fn slope_chain_holds_at_two_depths() {
        // every piece of g expands by at most ν+ε, for N and N − 5 alike
        let c = qi(2) + q(1, 10);
        for n in [25, 30] {
            let r = variation_conjugacy(&f_a(), &qi(2), &q(1, 10), n).unwrap();
            assert!(r.certified);
            for p in r.g.pieces() {
                assert!(p.slope().abs() <= c);
            }
        }
    }

    #[test]
    fn constant_slope_input_stays_in_band() {
        let eps = q(1, 2);
        let r = variation_conjugacy(&PwlMap::tent(), &qi(2), &eps, 12).unwrap();
        assert!(qi(2) <= r.lip_g && r.lip_g <= qi(2) + eps);
    }

    #[test]
    fn residual_on_table_nodes() {
        let r = variation_conjugacy(&f_a(), &qi(2), &q(1, 10), 30).unwrap();
        let res = crate::pwl_map::check_conjugacy(&f_a(), &r.g, &r.phi, r.phi.xs());
        assert!(res < 1e-9);
    }

    #[test]
    fn tent_conjugate_within_bound() {
        let r = variation_conjugacy(&PwlMap::tent(), &qi(2), &q(1, 2), 20).unwrap();
        assert!(r.lip_g <= q(5, 2));
        assert_eq!(r.lip_g, qi(2));
    }
}
