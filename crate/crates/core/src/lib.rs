//! # caplab
//!
//! Exact finite-space machinery for non-additive probability: capacities,
//! credal sets and Choquet integrals, the comonotonicity tools behind
//! Fubini-type theorems for capacities, decision procedures for several
//! independence notions on multi-urn (Ellsberg) models, and a weak law of
//! large numbers laboratory that combines exact lower probabilities with
//! Monte Carlo simulation under mean and variance uncertainty.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measure`] | spaces, capacities, credal sets, envelopes, cores, Choquet integrals |
//! | [`comonotone`] | comonotonicity predicates, exp-sum grids, dyadic chain decompositions |
//! | [`independence`] | urn models; MM, exponential, Fubini and Peng independence checks |
//! | [`ellsberg`] | the dominating probability `P'` and product Fubini verification |
//! | [`wlln`] | truncation, centering, exact lower probabilities, Monte Carlo |
//! | [`report`] | CSV and SVG emitters |
//! | [`config`] | JSON scenario configuration |
//! | [`cli`] | command dispatch used by the `caplab` binary |
//!
//! ```
//! use caplab::measure::{CredalSet, FiniteSpace, RandomVariable};
//!
//! let urn = FiniteSpace::new(["R", "B"]).unwrap();
//! let priors = CredalSet::from_rows(&urn, vec![vec![0.5, 0.5], vec![0.3, 0.7]]).unwrap();
//! let red = RandomVariable::new(&urn, vec![1.0, 0.0]).unwrap();
//! assert_eq!(priors.upper_envelope(&red), 0.5);
//! assert_eq!(priors.lower_envelope(&red), 0.3);
//! ```

pub mod cli;
pub mod comonotone;
pub mod config;
pub mod ellsberg;
pub mod independence;
pub mod measure;
pub mod report;
pub mod rng;
pub mod wlln;
