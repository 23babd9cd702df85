//! Bounds and certificates for Lipschitz p-summing norms of finite-dimensional
//! multilinear operators between `ℓ_r` spaces.

pub mod dp_norm;
pub mod error;
pub mod form_norm;
pub mod cli;
pub mod hilbert_schmidt;
pub mod io;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod simplex;
pub mod suite;
pub mod summing;
pub mod tensor;

pub use error::{Error, Result};
pub use form_norm::{config_denominator, operator_norm, Ball};
pub use report::BoundReport;
pub use tensor::{elementary_tensor, vector_norm, DenseTensor, MultilinearOperator, Norm, PairConfiguration, SegrePoint};
