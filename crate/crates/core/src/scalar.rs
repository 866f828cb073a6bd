//! Scalar abstraction for lattice masses, kernel weights and map values.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Mass
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for tolerances and literals.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion to `f64`, exact for `f64`, widening for `f32`.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::from_f64_lossy(0.5)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Mass
        + std::fmt::Debug
        + std::fmt::Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Per-site mass value: a real for deterministic fields, an integer count
/// for stochastic ones. Both view into any [`Real`] for mean computations.
pub trait Mass: Clone + Default + Send + Sync + 'static {
    fn to_real<R: Real>(&self) -> R;
}

impl Mass for f64 {
    fn to_real<R: Real>(&self) -> R {
        R::from_f64_lossy(*self)
    }
}

impl Mass for f32 {
    fn to_real<R: Real>(&self) -> R {
        R::from_f32(*self).expect("f32 converts to any Real")
    }
}

impl Mass for u64 {
    fn to_real<R: Real>(&self) -> R {
        R::from_u64(*self).expect("count fits scalar")
    }
}
