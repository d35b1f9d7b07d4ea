//! Explicit ReLU and RePU network constructions for Hermite polynomials,
//! Wiener-Hermite surrogates of analytic maps, and the numerical harness
//! that checks their error bounds and rates.
//!
//! Module map:
//! - [`relu_net`]: sparse feedforward networks, their algebra and I/O.
//! - [`hermite`]: Hermite polynomials and functions, quadrature, tail bounds.
//! - [`emulation`]: univariate ReLU emulators of polynomials and `H_n`.
//! - [`tensor`]: product networks, tensorized Hermite networks, RePU nets.
//! - [`index_sets`]: multi-indices and truncation sets.
//! - [`gpc`]: coefficients, surrogates and convergence studies.
//! - [`pde`]: a 1-D lognormal diffusion problem and its surrogate study.

pub mod emulation;
pub mod error;
pub mod exec;
pub mod gpc;
pub mod hermite;
pub mod index_sets;
pub mod logreal;
pub mod pde;
pub mod relu_net;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
