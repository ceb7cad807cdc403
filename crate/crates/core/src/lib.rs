//! Exact p-adic machinery for a perturbed polynomial family with wandering
//! discs: field arithmetic in finite extensions of Q_p, tail-bounded power
//! series with Gauss norms, non-archimedean root finding, the dynamics of
//! the degree p+1 family, and a constructive parameter search that emits
//! independently checkable certificates.
//!
//! No floating point is used anywhere; every comparison is an exact
//! rational valuation comparison.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod padic;
pub mod series;
pub mod wander;

pub use error::{Error, Result};
pub use padic::{Context, Elem, FqElem, Rat, UltraBall, Valuation};
pub use series::Series;
