//! Scalar abstraction shared by every numeric module.
//!
//! All math in this crate is written against [`Real`], which is implemented for
//! `f32` and `f64`. Tolerances that depend on machine precision are exposed as
//! associated constants so the same invariants can be checked at both widths.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Relative tolerance for the symmetry check on incoming matrices.
    const SYMMETRY_TOL: f64;
    /// Eigenvalues at or below `EIGEN_FLOOR * lambda_max` are treated as non-positive.
    const EIGEN_FLOOR: f64;
    /// Relative threshold below which Gram eigenvalues are clamped to zero.
    const CLAMP_FLOOR: f64;
    /// Allowed deviation from unit norm for dictionary columns.
    const UNIT_NORM_TOL: f64;

    /// Converts an `f64` literal or parameter into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    const SYMMETRY_TOL: f64 = 1e-12;
    const EIGEN_FLOOR: f64 = 1e-10;
    const CLAMP_FLOOR: f64 = 1e-12;
    const UNIT_NORM_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const SYMMETRY_TOL: f64 = 1e-5;
    const EIGEN_FLOOR: f64 = 1e-6;
    const CLAMP_FLOOR: f64 = 1e-6;
    const UNIT_NORM_TOL: f64 = 1e-5;
}
