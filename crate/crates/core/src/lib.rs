//! Neumann-Poincaré spectra and layer potentials on smooth closed curves and
//! surfaces, together with the principal-symbol dynamics that govern how the
//! eigenfunctions localize.

// Negated comparisons below are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod geometry;
pub mod helmholtz;
pub mod localization;
pub mod potential;
pub mod quadrature;
pub mod selftest;
pub mod spectrum;
pub mod symbol;

pub use error::{Error, Result};
