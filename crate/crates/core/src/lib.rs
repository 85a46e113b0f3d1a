//! Solver and verification tools for the nonlocal Burgers equation
//! `u_t + (−Δ)^{α/2} u + u u_x = f` on `(−1, 1)` with zero exterior data.

pub mod acceptance;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod harness;
pub mod kernel;
pub mod oracle;
pub mod quadrature;
pub mod spaces;
pub mod stochastic;

pub use error::{Error, Result};
