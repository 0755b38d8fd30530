//! Squeezed coherent-state superpositions under loss.
//!
//! The crate builds bosonic states in a truncated Fock basis, sends them
//! through lossy and squeezed-environment Gaussian channels, evaluates their
//! Wigner functions, and tracks how the most negative Wigner value decays as
//! the channel transmission falls. A synthetic homodyne tomography loop
//! closes the chain from sampled quadratures back to a density matrix.

pub mod channels;
pub mod error;
pub mod metrics;
pub mod optimize;
pub mod special;
pub mod states;
pub mod tomography;
pub mod wigner;

pub use error::{Error, Result};
pub use states::{DensityMatrix, Parity, SqueezeParams};
pub use num_complex::Complex64;
