//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// A real floating-point scalar the Gaussian formalism can be evaluated in.
///
/// The tolerances are attached to the scalar type so that generic code picks
/// thresholds that make sense for the precision it actually runs in.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Tolerance for matrix identities (`S σ Sᵀ = σ`, round trips, ...).
    const TAU_LIN: Self;
    /// Margin used for positive-definiteness and physicality decisions.
    const TAU_PSD: Self;
    /// Relative cut below which eigenvalues count as zero in pseudo-inverses.
    const TAU_RANK: Self;

    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const TAU_LIN: f64 = 1e-9;
    const TAU_PSD: f64 = 1e-10;
    const TAU_RANK: f64 = 1e-10;
}

impl Real for f32 {
    const TAU_LIN: f32 = 1e-4;
    const TAU_PSD: f32 = 1e-5;
    const TAU_RANK: f32 = 1e-5;
}
