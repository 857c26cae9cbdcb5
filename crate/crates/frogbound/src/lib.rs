//! Simulation, enumeration, and certification toolkit for threshold frog
//! models on infinite d-ary trees.
//!
//! The crate is organized around five subsystems:
//!
//! - [`rng`], [`dist`], [`threshold`], [`order`]: seedable random-variate
//!   kernel and Poisson-order utilities (thinning, domination criteria)
//!   consumed by everything else.
//! - [`tree`]: the full threshold frog model on a lazily grown, depth-capped
//!   d-ary tree, with recurrence proxies and critical-density bracketing.
//! - [`ssfm`] and [`gadget`]: the self-similar restriction (lazy
//!   non-backtracking walks, kill-at-root, only-one rule) and the spine
//!   gadget whose root-halt law defines the operator on candidate
//!   distributions.
//! - [`rde`]: the recursive distributional equation — truncated direct
//!   sampling, population dynamics, and bootstrap estimates.
//! - [`certifier`]: exact bitstring combinatorics, enumeration-based claim
//!   checking, and the certificate search producing explicit (lambda0, mu0)
//!   recurrence bounds.
//!
//! Every sampler is a pure function of its inputs and an [`rng::RngStream`];
//! replica-level parallelism assigns each replica a disjoint stream, so all
//! results are reproducible bit-for-bit regardless of worker count.

pub mod certifier;
pub mod dist;
pub mod gadget;
pub mod order;
pub mod rde;
pub mod rng;
pub mod ssfm;
pub mod stats;
pub mod threshold;
pub mod tree;

mod error;

pub use error::{Error, Result};
