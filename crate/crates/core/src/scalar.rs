use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the closed-form rate and phase code.
///
/// Implemented for `f32` and `f64`. Tolerances that only make sense in
/// double precision are scaled by [`Real::tolerance`].
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    /// `max(requested, 64 * machine epsilon)`.
    #[inline]
    fn tolerance(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        let req = Self::lit(requested);
        if req > floor {
            req
        } else {
            floor
        }
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Relative equality used for symbolic boundaries (`a == b` up to `rel * |b|`).
#[inline]
pub(crate) fn rel_eq<T: Real>(a: T, b: T, rel: f64) -> bool {
    let scale = b.abs().max(a.abs());
    (a - b).abs() <= T::tolerance(rel) * scale
}
