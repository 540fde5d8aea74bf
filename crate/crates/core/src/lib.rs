//! Lipschitz constants in conjugacy classes of interval maps.
//!
//! Two constructive routes to small-Lipschitz conjugates are implemented:
//!
//! * [`variation_conjugator`]: for any piecewise-linear map, the homeomorphism
//!   `φ(x) = Σ_n Var f^n|_{[0,x]} / (ν+ε)^n` (truncated) and the conjugate map
//!   with Lipschitz constant at most `ν+ε`.
//! * [`markov_conjugator`]: for Markov maps, a conjugacy built from a
//!   summable λ-subeigenvector of the transition matrix.
//!
//! Supporting modules count paths in finite and periodic-banded transition
//! graphs ([`markov_chain`]), construct and verify subeigenvectors
//! ([`subeigen`]), and reproduce a countably-Markov example whose best
//! Lipschitz constant exceeds the exponential of its entropy ([`gap_example`]).

pub mod error;
pub mod gap_example;
pub mod markov_chain;
pub mod markov_conjugator;
pub mod pwl_map;
pub mod rational;
pub mod subeigen;
pub mod table;
pub mod variation_conjugator;

pub use error::{Error, Result};
pub use markov_chain::{MarkovMap, MarkovSystem, State, TransitionStructure};
pub use pwl_map::{AnalyticMap, PeriodicLift, PwlMap};
pub use rational::Q;
pub use subeigen::SubeigenVector;
pub use table::MonotoneTable;
