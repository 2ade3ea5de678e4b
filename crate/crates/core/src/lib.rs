//! Long-range operators on Z^d with polynomially decaying hopping.
//!
//! The crate builds truncations of operators `(Hu)(n) = Σ_j a_j^n u(n-j)`,
//! certifies spectrum membership from truncated candidate eigenfunctions
//! (Weyl residuals with rigorous remainder bounds), computes band spectra of
//! periodic operators with a Hausdorff enclosure, and samples random
//! ensembles, including the closed-form spectrum of one-dimensional random
//! Jacobi matrices.
//!
//! Modules:
//! - [`lattice`]: balls, lattice sums, explicit tail bounds
//! - [`operator`]: coefficient fields, truncation, structural checks
//! - [`shnol`]: Weyl residuals, the four-region residual bounds, certificates
//! - [`floquet`]: Bloch symbols and periodic spectra
//! - [`ensemble`]: random ensembles, Monte Carlo spectra, perturbation bounds,
//!   Jacobi closed form
//! - [`spectrum`]: interval unions, Minkowski sums, Hausdorff distance

// `!(x > 0.0)` is used deliberately so that NaN arguments are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod floquet;
pub mod lattice;
pub mod numeric;
pub mod operator;
pub mod shnol;
pub mod spectrum;

pub use error::{Error, Result};
pub use lattice::{Ball, LatticePoint};
pub use num_complex::Complex64;
pub use operator::{CoefficientField, CoefficientRule, DecayEnvelope, OperatorKind, TruncatedMatrix};
pub use spectrum::SpectrumSet;
