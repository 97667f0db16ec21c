//! Phase-space toolkit for Klein-Gordon type operators with asymptotically
//! flat Lorentzian coefficients: escape observables, Hamilton flows, Weyl
//! quantization on a periodic grid and numerical checks of the commutator
//! inequalities built from them.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod probe;
pub mod quantize;
pub mod smooth;
pub mod symbols;

pub use error::{Error, Result};
