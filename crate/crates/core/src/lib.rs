//! A computational laboratory for the Syracuse (accelerated Collatz)
//! dynamics: exact big-integer orbit algebra, exact 3-adic distributions of
//! the Syracuse random variables with their Fourier/mixing functionals,
//! seeded renewal-process simulation, first-passage experiments, and the
//! frequency-triangle geometry behind the character-sum bounds.
//!
//! Everything exact is exact: orbit identities, distribution tables,
//! oscillation values, and black/white lattice classification use
//! arbitrary-precision integer and rational arithmetic.  Monte Carlo paths
//! are seeded and deterministic, with per-sample substreams so results do not
//! depend on the worker count.

// The `x % k == 0` form is used throughout for congruence tests; it reads
// as written in the number theory here.
#![allow(clippy::manual_is_multiple_of)]

pub mod dist;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod passage;
pub mod scalar;
pub mod selftest;
pub mod stochastic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact probability, as used in every exact table.
pub type Rational = num_rational::BigRational;

/// A complex character-sum value.
pub type ComplexValue = num_complex::Complex64;

/// Exact distribution over Z/3^n Z.
pub type Dist3Adic = dist::Dist3<Rational>;

/// Double-precision distribution over Z/3^n Z for large n.
pub type Dist3AdicFloat = dist::Dist3<f64>;
