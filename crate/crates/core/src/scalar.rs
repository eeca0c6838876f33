//! Scalar abstraction for the state algebra and beam optics.
//!
//! Everything in [`crate::qmath`] and [`crate::optics`] is written against
//! [`Real`], so the same code runs in `f32` or `f64`. The simulation layers
//! above pin `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the generic math modules.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for identities that are exact in real arithmetic
    /// (unitarity, normalization, Hermiticity, trace).
    const EXACT_TOL: Self;
    /// Tolerance for eigenvalue positivity after floating-point reconstruction.
    const PSD_TOL: Self;

    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }
}

impl Real for f64 {
    const EXACT_TOL: Self = 1e-12;
    const PSD_TOL: Self = 1e-9;
}

impl Real for f32 {
    const EXACT_TOL: Self = 1e-5;
    const PSD_TOL: Self = 1e-5;
}
