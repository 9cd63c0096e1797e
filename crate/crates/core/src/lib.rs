//! Convergence-rate laboratory for renewal-type countable Markov chains.
//!
//! The chain lives on the positive integers. From state 1 it jumps to state
//! `n` with probability `p_n`; from any state `i ≥ 2` it descends
//! deterministically to `i - 1`. Everything here is built around that
//! structure: power-series algebra for generating functions ([`series`]),
//! the chain itself and its first-passage laws ([`chain`]), exact evolution
//! of signed distributions and rate fits ([`evolve`]), truncated operators
//! and eigenvector probes ([`spectral`]), and the piecewise-affine
//! intermittent interval map that realizes the chain ([`dynsys`]).

pub mod chain;
pub mod dynsys;
pub mod error;
pub mod evolve;
pub mod numeric;
pub mod series;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use series::TruncatedSeries;
