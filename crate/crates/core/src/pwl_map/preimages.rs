use crate::error::{Error, Result};
use crate::pwl_map::{PeriodicLift, PwlMap};
use crate::rational::Q;

/// Closed interval `[lo, hi]` that every reported preimage must lie in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub lo: Q,
    pub hi: Q,
}

impl Window {
    pub fn new(lo: Q, hi: Q) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid("window must have lo <= hi"));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.lo <= *x && *x <= self.hi
    }
}

/// Maps whose one-step preimages can be enumerated exactly.
pub trait Invertible {
    fn preimages_of(&self, y: &Q) -> Result<Vec<Q>>;

    /// `#f^{-1}({y})`; equals `preimages_of(y)?.len()`.
    fn preimage_multiplicity(&self, y: &Q) -> Result<usize> {
        Ok(self.preimages_of(y)?.len())
    }
}

impl Invertible for PwlMap {
    fn preimages_of(&self, y: &Q) -> Result<Vec<Q>> {
        if !crate::rational::is_unit_interval(y) {
            return Ok(Vec::new());
        }
        self.preimages_once(y)
    }

    fn preimage_multiplicity(&self, y: &Q) -> Result<usize> {
        if !crate::rational::is_unit_interval(y) {
            return Ok(0);
        }
        let mut hits = 0;
        for p in self.pieces() {
            if p.contains_value(y) {
                if p.y0 == p.y1 {
                    return Err(Error::InfinitePreimages(y.to_string()));
                }
                hits += 1;
            }
        }
        // a breakpoint with value y is the common end of two hitting pieces
        let shared = self.values()[1..self.values().len() - 1].iter().filter(|v| *v == y).count();
        Ok(hits - shared)
    }
}

impl Invertible for PeriodicLift {
    fn preimages_of(&self, y: &Q) -> Result<Vec<Q>> {
        self.preimages_once(y)
    }
}

/// The sorted set `f^{-n}({x})`.
///
/// Distinct branches of the preimage tree never meet (their `f`-images
/// differ), so no global deduplication is needed.
pub fn preimages(
    map: &impl Invertible,
    x: &Q,
    n: usize,
    window: Option<&Window>,
    cap: usize,
) -> Result<Vec<Q>> {
    let mut level = vec![x.clone()];
    for _ in 0..n {
        let mut next = Vec::new();
        for y in &level {
            for p in map.preimages_of(y)? {
                check_window(&p, window)?;
                next.push(p);
            }
            if next.len() > cap {
                return Err(Error::ResourceCap {
                    what: "preimages",
                    count: next.len(),
                    cap,
                });
            }
        }
        level = next;
    }
    level.sort();
    Ok(level)
}

/// `#f^{-n}({x})` by depth-first branch inversion, in `O(n)` memory.
pub fn preimage_count(map: &impl Invertible, x: &Q, n: usize, window: Option<&Window>) -> Result<u128> {
    if n == 0 {
        return Ok(1);
    }
    if n == 1 && window.is_none() {
        return Ok(map.preimage_multiplicity(x)? as u128);
    }
    let mut total = 0u128;
    for p in map.preimages_of(x)? {
        check_window(&p, window)?;
        total += preimage_count(map, &p, n - 1, window)?;
    }
    Ok(total)
}

fn check_window(p: &Q, window: Option<&Window>) -> Result<()> {
    match window {
        Some(w) if !w.contains(p) => Err(Error::WindowTooSmall(format!(
            "preimage {p} leaves [{}, {}]",
            w.lo, w.hi
        ))),
        _ => Ok(()),
    }
}
