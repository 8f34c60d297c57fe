//! Numerical analysis of long Willmore cylinder necks.
//!
//! The library computes the conserved slice residues of the Willmore
//! functional, circle-slice Fourier spectra, three-circle decay diagnostics,
//! and the asymptotic limit fields on neck regions, and ships the explicit
//! rotating cylinder families in R^3 and R^4 on which every quantitative
//! statement can be checked at desk scale.

pub mod cli;
pub mod exterior;
pub mod geometry;
pub mod jet;
pub mod model;
pub mod neck;
pub mod residue;
pub mod spectral;
pub mod threecircle;

mod stencil;

pub use exterior::{Bivector, GrassmannPoint, SkewMatrix, Vector};

use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
