//! Quantum phase-space Brownian motion: Markov-limit kernels, the exact
//! finite-oscillator bath, Weyl-word conditional expectations, the truncated
//! Lindblad master equation and a discrete stopping-time chain.

pub mod density;
pub mod discrete;
pub mod error;
pub mod finite_bath;
pub mod kernel;
pub mod lindblad;
pub mod quad;
pub mod weyl;

pub use density::SpectralDensity;
pub use error::{Error, Result};
pub use kernel::ProcessParams;
pub use num_complex::Complex64 as C64;
pub use quad::QuadConfig;
