//! Stabilizer simulation of circuits with mid-circuit measurements, uniform
//! stochastic instrument noise models, and cycle benchmarking of measurement
//! layers.

pub mod circuit;
pub mod clifford;
pub mod error;
pub mod mcmcb;
pub mod noise;
pub mod pauli;
pub mod ptg;
pub mod rc;
pub mod rng;
pub mod tableau;

pub use error::{Error, Result};
pub use pauli::{FlipPatternPair, Letter, PauliOp, ProbTable, ZMask};
