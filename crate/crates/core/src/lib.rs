//! Exact finite-stage toolkit for product measures, staged covers, and
//! filter combinatorics on the Cantor space.
//!
//! Everything measure-valued is computed in arbitrary-precision rational
//! arithmetic; operations that would need to enumerate more bit patterns
//! than the configured cap refuse with an explicit error instead of
//! approximating.

pub mod antichain;
pub mod bias;
pub mod covers;
pub mod error;
pub mod filters;
pub mod halving;
pub mod interval;
pub mod measure;
pub mod rational;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use rational::Rational;
