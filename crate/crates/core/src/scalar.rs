//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Counting is exact and works for any `Num + FromPrimitive` type
//! (including `Ratio<i64>`); everything that needs logarithms is bound by
//! [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used by the thermodynamic and variational code.
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Tolerance for checks that are exact up to rounding (normalizations,
    /// algebraic identities). `1e-12` in double precision.
    fn identity_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(128.0))
    }

    /// Gradient-norm target for the deterministic Newton solves.
    fn solver_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(1024.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `v ln v` with the continuous extension `0 ln 0 = 0`.
pub fn lf<T: Real>(v: T) -> T {
    if v == T::zero() {
        T::zero()
    } else {
        v * v.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lf_extends_continuously_at_zero() {
        assert_eq!(lf(0.0f64), 0.0);
        assert_eq!(lf(1.0f64), 0.0);
        assert!((lf(0.5f64) - 0.5 * 0.5f64.ln()).abs() < 1e-16);
        assert!(lf(1e-300f64).abs() < 1e-290);
    }

    #[test]
    fn tolerances_track_precision() {
        assert_eq!(f64::identity_tol(), 1e-12);
        assert_eq!(f64::solver_tol(), 1e-10);
        assert!(f32::identity_tol() > 1e-6);
    }
}
