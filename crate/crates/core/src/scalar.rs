//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point field the geometry is generic over (`f32` or `f64`).
///
/// The associated tolerances are relative thresholds tuned to the precision
/// of the type.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Smallest admissible eigenvalue, relative to the largest one.
    const PD_TOL: f64;
    /// Largest admissible asymmetry, relative to the largest entry.
    const SYM_TOL: f64;
    /// Relative Frobenius tolerance used by reconstruction checks.
    const RECON_TOL: f64;
    /// Tolerance on `UᵀU = I`.
    const ORTH_TOL: f64;
    /// Stopping tolerance of the one-dimensional solver.
    const SOLVER_TOL: f64;

    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    const PD_TOL: f64 = 1e-12;
    const SYM_TOL: f64 = 1e-10;
    const RECON_TOL: f64 = 1e-8;
    const ORTH_TOL: f64 = 1e-10;
    const SOLVER_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const PD_TOL: f64 = 1e-6;
    const SYM_TOL: f64 = 1e-5;
    const RECON_TOL: f64 = 1e-4;
    const ORTH_TOL: f64 = 1e-5;
    const SOLVER_TOL: f64 = 1e-5;
}
