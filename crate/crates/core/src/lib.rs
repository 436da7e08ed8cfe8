//! Alpha-permanental random vectors whose kernels invert to nonsingular M-matrices.

pub mod bounds;
pub mod error;
pub mod gamma_tools;
pub mod levy;
pub mod linalg;
pub mod markov_gen;
pub mod permanental_model;
pub mod quadrature;
pub mod sampler;
pub mod series;

pub use error::{Error, NotMReason, Result};
pub use linalg::{DenseMatrix, MMatrixPair, MultiIndex};
pub use permanental_model::{PermanentalSpec, ZDistribution};
