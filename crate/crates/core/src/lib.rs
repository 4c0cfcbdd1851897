//! Quantum combs and testers, SDP certificates of tester incompatibility, and
//! the discrimination and exclusion games that those certificates quantify.
//!
//! Systems follow the convention that even indices are inputs and odd indices
//! outputs. An n-slot tester acts on systems `0..2n` and measures
//! (n-1)-slot combs on the same systems.

pub mod cli;
pub mod comb;
pub mod conic;
pub mod error;
pub mod games;
pub mod incompat;
pub mod instances;
pub mod io;
pub mod report;
pub mod sampling;
pub mod signature;
pub mod tensor;
pub mod tester;

pub use error::{Error, Result};
