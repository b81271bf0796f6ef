//! Workbench for list-learning combinatorics: finite concept classes, exact
//! k-Littlestone and k-monotone dimensions with independent brute-force
//! oracles, constructive Ramsey machinery on b-ary trees, online k-list
//! learners with comparison-based-loss checking, and desk-scale simulation of
//! privacy lower-bound reductions (interior-point and packing attacks).
//!
//! Everything is deterministic under explicit seeds; all randomized
//! experiments fan out of one master seed through counter-based streams.

pub mod concepts;
pub mod dims;
pub mod error;
pub mod learners;
pub mod privacy;
pub mod ramsey;
pub mod rng;
pub mod trees;

pub use error::{Error, Result};
