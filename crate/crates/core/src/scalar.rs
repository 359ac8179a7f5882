//! Scalar abstraction shared by the numerical substrate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// The tolerance hooks scale the fixed checks (unit norm, Hermiticity,
/// independence) to the precision of the type.
pub trait Real:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for normalization and probability-sum checks.
    fn norm_tol() -> Self;
    /// Tolerance below which a Pauli-coefficient residual counts as zero.
    fn independence_tol() -> Self;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    fn norm_tol() -> Self {
        1e-10
    }
    fn independence_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn norm_tol() -> Self {
        1e-5
    }
    fn independence_tol() -> Self {
        1e-5
    }
}

/// [`Real`] scalars the dense eigensolver accepts.
pub trait EigenReal: Real + nalgebra::RealField {}

impl<T: Real + nalgebra::RealField> EigenReal for T {}
