//! Numerical laboratory for compensated-compactness phenomena.
//!
//! The crate is organised bottom-up: [`symbol`] holds constant-coefficient
//! operator symbols, [`field`] the grid and sparse trigonometric
//! representations, [`norms`] every norm and Orlicz tool, and the remaining
//! modules build the decomposition, quasiaffinity, truncation, sharpness and
//! half-space experiments on top.

pub mod counterexamples;
pub mod decompose;
pub mod error;
pub mod extension;
pub mod field;
pub mod fit;
pub mod norms;
pub mod quad;
pub mod quasiaffine;
pub mod rng;
pub mod symbol;
pub mod truncate;

pub use error::{Error, Result};

/// Library version recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
