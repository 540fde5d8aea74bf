use std::collections::HashMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pwl_map::PwlMap;
use crate::rational::{self, Q};

/// Exact `Var f^n|_{[0,x]}` without materializing `f^n`.
///
/// On a monotone piece `[x_j, x_{j+1}]` of `f`, `Var f^n` equals the variation
/// of `f^{n-1}` over the image interval, so
/// `W_n(x) = W_n(x_j) + |W_{n-1}(f(x)) − W_{n-1}(f(x_j))|` with `W_0(x) = x`.
/// Only the orbits of `x` and of the turning values are ever visited.
pub struct IterVariation<'a> {
    map: &'a PwlMap,
    memo: Vec<HashMap<Q, Q>>,
    prefix: Vec<Vec<Q>>,
}

impl<'a> IterVariation<'a> {
    pub fn new(map: &'a PwlMap) -> Self {
        IterVariation {
            map,
            memo: Vec::new(),
            prefix: Vec::new(),
        }
    }

    pub fn map(&self) -> &PwlMap {
        self.map
    }

    /// `Var f^n|_{[0,x]}`.
    pub fn on_prefix(&mut self, n: usize, x: &Q) -> Result<Q> {
        if !rational::is_unit_interval(x) {
            return Err(Error::OutOfDomain {
                x: x.to_string(),
                domain: "[0,1]".into(),
            });
        }
        Ok(self.w(n, x))
    }

    /// `Var f^n|_{[a,b]}` for `a <= b`.
    pub fn on_interval(&mut self, n: usize, a: &Q, b: &Q) -> Result<Q> {
        Ok(self.on_prefix(n, b)? - self.on_prefix(n, a)?)
    }

    /// `Var f^n` over `[0,1]`.
    pub fn total(&mut self, n: usize) -> Q {
        let one = rational::one();
        self.w(n, &one)
    }

    fn w(&mut self, n: usize, x: &Q) -> Q {
        if n == 0 {
            return x.clone();
        }
        if let Some(v) = self.memo.get(n).and_then(|m| m.get(x)) {
            return v.clone();
        }
        let map = self.map;
        let j = map.piece_index(x);
        let base = self.prefix_at(n, j);
        let fx = map.eval_unchecked(x);
        let here = self.w(n - 1, &fx);
        let at_left = self.w(n - 1, &map.values()[j]);
        let v = base + (here - at_left).abs();
        if self.memo.len() <= n {
            self.memo.resize_with(n + 1, HashMap::new);
        }
        self.memo[n].insert(x.clone(), v.clone());
        v
    }

    /// `W_n` at breakpoint `j`.
    fn prefix_at(&mut self, n: usize, j: usize) -> Q {
        if self.prefix.len() <= n {
            self.prefix.resize_with(n + 1, Vec::new);
        }
        if self.prefix[n].is_empty() {
            let map = self.map;
            let values = map.values();
            let at_values: Vec<Q> = values.iter().map(|y| self.w(n - 1, y)).collect();
            let mut acc = Q::zero();
            let mut table = Vec::with_capacity(values.len());
            table.push(acc.clone());
            for k in 1..values.len() {
                acc += (&at_values[k] - &at_values[k - 1]).abs();
                table.push(acc.clone());
            }
            self.prefix[n] = table;
        }
        self.prefix[n][j].clone()
    }
}

/// One row of the variation-growth table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationRow {
    pub n: usize,
    #[serde(with = "rational::serde_q")]
    pub var: Q,
    /// `(Var f^n)^{1/n}`.
    pub root: f64,
}

/// `Var f^n` for `n = 1..=n_max` with the `n`-th root estimates of `ν(f)`.
///
/// The last root is an estimate of a limsup, not a limit.
pub fn variation_growth(map: &PwlMap, n_max: usize) -> Result<Vec<VariationRow>> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let mut iv = IterVariation::new(map);
    Ok((1..=n_max)
        .map(|n| {
            let var = iv.total(n);
            let root = (ln_q(&var) / n as f64).exp();
            VariationRow { n, var, root }
        })
        .collect())
}

pub fn ln_q(x: &Q) -> f64 {
    rational::ln_bigint(x.numer()) - rational::ln_bigint(x.denom())
}
