//! Scalar abstraction for the numeric core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Default + 'static {
    /// Lift an `f64` constant into this scalar type.
    #[inline]
    fn cst(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Default + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cst_roundtrips_for_both_scalars() {
        assert_eq!(f64::cst(0.15), 0.15);
        assert_eq!(f32::cst(0.15), 0.15f32);
    }
}
