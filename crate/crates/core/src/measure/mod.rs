//! Finite sample spaces, capacities, credal sets and Choquet integration.
//!
//! Everything here is exact on finite spaces: capacities are dense tables
//! over all `2^n` subsets (`n <= 20`), credal sets are finite lists of
//! probability vectors, and upper/lower probabilities of credal sets can
//! be used either as dense [`Capacity`] tables or lazily through
//! [`SetFunction`], which is all Choquet integration needs.

mod capacity;
mod choquet;
mod credal;
mod error;
mod space;

pub use capacity::{
    mobius_inverse, validate_capacity, validate_capacity_with, Capacity, Classification,
    CoreMaximizer, MAX_EXHAUSTIVE_ATOMS,
};
pub use choquet::{choquet_integral, SetFunction};
pub use credal::{CredalSet, Envelope, LowerProbability, UpperProbability};
pub use error::MeasureError;
pub use space::{
    descending_order, distinct_sorted, FiniteSpace, ProbabilityVector, RandomVariable, SubsetMask,
    MAX_TABLE_ATOMS,
};

/// Tolerance on the unit sum of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Floating-point equality tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// For quantities obtained through long chains of arithmetic.
    pub derived: f64,
    /// For direct arithmetic identities.
    pub identity: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            derived: 1e-9,
            identity: 1e-12,
        }
    }
}
