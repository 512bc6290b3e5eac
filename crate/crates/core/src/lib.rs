//! Spectral laboratory for the fractional quasilinear Schrödinger equation
//! `∂_t u = -i|D|^α u + |u|² u_x` on the torus.
//!
//! Fields live on a truncated Fourier basis; symbols are sampled on a spatial
//! grid times a half-integer frequency lattice and quantized into dense
//! matrices. On top of that sit resonance audits, normal-form flows, time
//! integration and the positive-commutator growth mechanism.

// NaN-rejecting guards are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate blas_src;

pub mod dynamics;
pub mod fourier;
pub mod hiprec;
pub mod linalg;
pub mod mourre;
pub mod normalform;
pub mod paradiff;
pub mod resonance;
pub mod symbol;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("integration diverged at t = {t}: {reason}")]
    Diverged { t: f64, reason: String },
    #[error("division by a resonant frequency sum at {0}")]
    ResonantDivision(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
