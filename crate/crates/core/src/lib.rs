//! Entanglement distribution with two-mode squeezed vacuum sources and
//! atomic noiseless amplifiers.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, density matrices, partial
//!   transpose/trace and Hermitian spectra.
//! * [`register`]: the heralded two-qubit register state of one elementary
//!   link in closed form, for arbitrary amplifier size `N`.
//! * [`single_qubit`]: the `N = 1` design, including the bonded angle and the
//!   root-finding for a target success probability.
//! * [`swap`]: Bell measurements, corrections and repeater chains.
//! * [`metrics`]: negativity, CHSH, QBER, key rates and the PLOB bound.
//! * [`stats`]: waiting-time statistics for `M` independently retried links.
//! * [`fock`]: a truncated Fock-space simulator used to cross-check the
//!   closed-form register and to model hardware imperfections.

pub mod error;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod register;
pub mod single_qubit;
pub mod stats;
pub mod swap;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix};
pub use num_complex::Complex64;
