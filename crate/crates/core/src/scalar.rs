//! Floating-point abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the linear-algebra kernel and the completion pipeline.
///
/// Implemented for `f32` and `f64`. The associated tolerances are the
/// precision-dependent knobs; everything else is written against
/// [`num_traits::Float`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Relative off-diagonal threshold at which a Jacobi sweep stops rotating.
    const JACOBI_TOL: f64;
    /// Default relative singularity threshold, `sigma_min / sigma_max`.
    const SINGULARITY_TOL: f64;

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn jacobi_tol() -> Self {
        Self::from_f64_lossy(Self::JACOBI_TOL)
    }
}

impl Scalar for f64 {
    const JACOBI_TOL: f64 = 1e-12;
    const SINGULARITY_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const JACOBI_TOL: f64 = 1e-6;
    const SINGULARITY_TOL: f64 = 1e-5;
}
