//! Dyadic operator-valued BMO at finite resolution.
//!
//! Symbols are matrix-valued step functions on the circle `[0, 1)` cut into
//! `2^d` dyadic cells. The crate builds explicit matrices for paraproducts,
//! Haar multipliers, sweeps and martingale transforms on the discretized
//! `L^2(T, C^n)`, and computes the BMO-type norms that compare them.

pub mod averaging;
pub mod dyadic;
pub mod error;
pub mod format;
pub mod growth;
pub mod linalg;
pub mod norms;
pub mod operators;
pub mod sweep;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
