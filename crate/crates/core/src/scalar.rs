//! Scalar abstraction shared by the numeric kernels.
//!
//! CPM passes, duration beliefs, Monte Carlo forecasting, buffer accounting
//! and earned-value metrics are written against [`Scalar`] so they run in
//! `f32` or `f64`. The orchestration layers use the `f64` aliases exported
//! from the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the engine: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Values are always representable (possibly
    /// rounded) in both supported types.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when deciding whether a float is zero in a CPM pass.
    fn float_tolerance(scale: Self) -> Self {
        let rel = Self::epsilon() * Self::lit(64.0) * scale.abs().max(Self::one());
        rel.max(Self::lit(1e-9))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
