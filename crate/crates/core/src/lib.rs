//! Numerical laboratory for the dimension theory of fractal measures:
//! exact cylinder measures on ρ-trees and their local entropy averages,
//! partition operators and CP-chain simulation, finite-scale projected
//! entropies with slope scans, circle convolution, and the lifting of
//! Lipschitz maps to tree morphisms.

pub mod chain;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod lift;
pub mod measures;
pub mod project;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
