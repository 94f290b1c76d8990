//! Maximum-determinant and maximum-rank completions of partial symmetric
//! Toeplitz matrices.

pub mod algebra;
pub mod error;
pub mod linalg;
pub mod model;
pub mod psd_path;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use model::{classify, Pattern, PartialToeplitz, PatternClass};
