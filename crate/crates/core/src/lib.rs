//! Random band-matrix spectral laboratory.
//!
//! Generates Hermitian random matrices with a prescribed sparsity pattern and
//! entry law, computes their spectra with an in-house Hermitian eigensolver,
//! and runs finite-size experiments on the semicircle law, the spectral edge,
//! eigenvector localization, spectral-norm concentration and the closed-walk
//! combinatorics behind the moment method.

pub mod cli;
pub mod concentration;
pub mod eigensolve;
pub mod ensemble;
pub mod error;
pub mod localization;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod spectral_stats;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
