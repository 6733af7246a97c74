//! Numerical laboratory for Liouvillians of dissipative one-dimensional lattice bosons.
//!
//! The pipeline is: enumerate a fixed-N sector ([`basis`]), assemble the
//! vectorized Liouvillian ([`liouvillian`]), diagonalize and classify its
//! eigenmodes ([`spectral`]), and compare against the closed-form one-particle
//! solution ([`single_particle`]) and the string solutions of the mapped
//! Hubbard ladder ([`bethe`]). [`dynamics`] evolves density matrices by two
//! independent routes and extracts relaxation and coherence observables.

pub mod basis;
pub mod bethe;
pub mod dynamics;
pub mod io;
pub mod liouvillian;
pub mod single_particle;
pub mod sparse;
pub mod spectral;

pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense size limit exceeded: D² = {d2} > {limit}")]
    SizeLimit { d2: usize, limit: usize },
    #[error("eigensolver failed: {0}")]
    SolverFailure(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("step size {dt} exceeds stability bound {bound}")]
    StepSize { dt: f64, bound: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArguments(msg.into()))
}
