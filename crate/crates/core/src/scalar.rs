//! Scalar abstraction shared by every numeric module.

use nalgebra as na;
use num_traits as nt;

/// Real scalar the library is generic over (`f32` or `f64`).
///
/// Group and representation code only needs field operations plus `sqrt`;
/// the rigid-body and learning modules additionally use trigonometry. Both
/// come from [`na::RealField`].
pub trait Real:
    na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + nt::FloatConst + Send + Sync
{
    /// Converts an `f64` literal or tolerance into this scalar.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Unit roundoff of the concrete type.
    fn machine_epsilon() -> Self {
        let two = Self::one() + Self::one();
        let mut e = Self::one();
        while Self::one() + e / two != Self::one() {
            e /= two;
        }
        e
    }

    /// A tolerance of `base`, widened for low-precision scalars so that
    /// thresholds tuned for `f64` remain meaningful for `f32`.
    fn tol(base: f64) -> Self {
        let floor = Self::machine_epsilon() * Self::lit(256.0);
        Self::lit(base).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Maximum absolute entry of a matrix; zero for empty matrices.
pub fn max_abs<T: Real>(m: &na::DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Maximum absolute entry of `a - b`; `None` when the shapes differ.
pub fn max_abs_diff<T: Real>(a: &na::DMatrix<T>, b: &na::DMatrix<T>) -> Option<T> {
    if a.shape() != b.shape() {
        return None;
    }
    Some(
        a.iter()
            .zip(b.iter())
            .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs())),
    )
}
