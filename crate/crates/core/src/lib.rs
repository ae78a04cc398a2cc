//! Numerical laboratory for density theorems of coherent frames.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure numerics:
//!
//! - [`geometry`]: concrete groups of polynomial growth with periodic metrics,
//!   ball enumeration, growth / annular-decay fits and Følner diagnostics.
//! - [`rep`]: finite Weyl–Heisenberg and continuous Gabor representations,
//!   matrix coefficients, local maximal functions and formal degrees.
//! - [`frame`]: frame, Riesz and Bessel bounds of coherent systems, canonical
//!   duals, relative separation and the dimension / Bessel lemmas.
//! - [`density`]: counting functions, Beurling densities, the error integrals
//!   `I_n` / `J_n` and checkers for the counting, density and hole-radius
//!   inequalities.
//!
//! File formats, configuration and the command line live in the `cofra` crate.

#![no_std]

extern crate alloc;

pub mod density;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod linalg;
pub mod quadrature;
pub mod rep;
pub mod rng;
pub mod serde_float;

pub use error::{Error, Result};
pub use linalg::C64;
