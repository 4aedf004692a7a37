//! Riemann-invariant analysis of first-order quasilinear PDE systems.
//!
//! * [`pde`] — systems, candidate solutions and the finite-difference residual oracle
//! * [`chardata`] — dispersion roots, integral elements, decomposition conditions
//! * [`fluid`] — the inhomogeneous fluid system, its elements and solution families
//! * [`examples`] — three further systems with printed solution families
//! * [`superpose`] — reduced systems, their integration and lifting
//! * [`report`] — the deterministic verification suite

pub mod chardata;
pub mod config;
pub mod error;
pub mod examples;
pub mod expr;
pub mod family;
pub mod fluid;
pub mod funcs;
pub mod linalg;
pub mod newton;
pub mod ode;
pub mod pde;
pub mod quad;
pub mod report;
pub mod rng;
pub mod special;
pub mod superpose;

pub use error::{Error, Result};
pub use pde::{CandidateSolution, ResidualReport, Sampler, SystemSpec, WaveVector};
