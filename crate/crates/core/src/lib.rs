//! Iteratively warm-started QAOA on a dense statevector simulator.
//!
//! The crate covers MaxCut on cubic graphs with the standard transverse-field
//! mixer and the discrete global minimum-variance portfolio (DGMVP) model with
//! a budget-preserving nearest-neighbour mixer. [`warmstart::run_iterative`]
//! drives the outer loop: optimise the circuit, measure, superpose the best
//! measured strings into the next initial state, repeat.

pub mod ansatz;
pub mod error;
pub mod graphs;
pub mod metrics;
pub mod optimizer;
pub mod portfolio;
pub mod seed;
pub mod statevector;
pub mod warmstart;

pub use error::{Error, Result};
