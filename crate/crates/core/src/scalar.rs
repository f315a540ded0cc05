use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of an in-memory embedding matrix.
///
/// Kernels read elements through [`ToPrimitive::to_f64`] and accumulate in
/// double precision, so results depend only on the stored values, not on the
/// element type's own arithmetic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless widening used by every distance kernel.
    #[inline(always)]
    fn widen(self) -> f64 {
        // Infallible for f32/f64.
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
