//! Gaussian-state formalism and the secret-key security analysis of a
//! homodyne post-selection protocol with classical advantage distillation.
//!
//! The numeric core is generic over [`Real`] (`f64` or `f32`); the aliases
//! below fix the precision for callers that do not care.

pub mod certify;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod ops;
pub mod random;
pub mod region;
pub mod scalar;
pub mod security;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;
pub use state::{BipartiteSplit, GaussianState, SymmetricStateParams};

pub type GaussianState64 = state::GaussianState<f64>;
pub type GaussianState32 = state::GaussianState<f32>;
pub type GaussianChannel64 = ops::GaussianChannel<f64>;
pub type GaussianChannel32 = ops::GaussianChannel<f32>;
pub type Purification64 = security::Purification<f64>;
pub type Purification32 = security::Purification<f32>;
pub type WilliamsonDecomposition64 = linalg::WilliamsonDecomposition<f64>;
pub type WilliamsonDecomposition32 = linalg::WilliamsonDecomposition<f32>;
pub type SymmetricStateParams64 = state::SymmetricStateParams<f64>;
pub type SymmetricStateParams32 = state::SymmetricStateParams<f32>;
