//! Quasi-stationary distributions of absorbed continuous-time Markov chains
//! and their Fleming-Viot particle approximations.
//!
//! The numerical core is generic over the scalar type: exact rationals for
//! rate bookkeeping and linear solves, `f32`/`f64` wherever exponentials or
//! simulation are involved. Concrete aliases for the common instantiations
//! live at the crate root.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod chain;
pub mod conditioned;
pub mod error;
pub mod experiment;
pub mod fv;
pub mod graphical;
pub mod linalg;
pub mod qsd;
pub mod rng;
pub mod scalar;

pub use chain::{validate_chain, ChainSummary, Distribution, RateMatrix, StateSpace, SubKernel};
pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Exact = num_rational::BigRational;

pub type RateMatrix64 = RateMatrix<f64>;
pub type RateMatrix32 = RateMatrix<f32>;
pub type ExactRateMatrix = RateMatrix<Exact>;
pub type Distribution64 = Distribution<f64>;
pub type ExactDistribution = Distribution<Exact>;
pub type SubKernel64 = SubKernel<f64>;
pub type ChainSummary64 = ChainSummary<f64>;
pub type ConditionedPath64 = conditioned::ConditionedPath<f64>;
pub type YaglomResult64 = conditioned::YaglomResult<f64>;
pub type QsdResult64 = qsd::QsdResult<f64>;
