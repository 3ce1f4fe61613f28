//! Poisson transforms on the Shilov boundary of the matrix balls `I_{r,r+b}`
//! (`b >= 1`), realized through `SU(r, r+b)` acting on `r × (r+b)` matrices.

pub mod boundary;
pub mod cli;
pub mod error;
pub mod fatou;
pub mod group;
pub mod hua;
pub mod io;
pub mod ktypes;
pub mod poisson;
pub mod structure;
pub mod suite;
pub mod linalg;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use scalar::Real;

/// Double-precision complex scalar used by the geometric modules.
pub type C64 = num_complex::Complex<f64>;
/// Double-precision complex matrix.
pub type CMat = CMatrix<f64>;
/// Single-precision complex matrix.
pub type CMat32 = CMatrix<f32>;
