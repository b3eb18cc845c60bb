use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Rectangular space-time box `[x_min, x_max] x [t_min, t_max]`.
///
/// Doubles as the network's input-normalization box: both coordinates are
/// mapped affinely onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain<S> {
    pub x_min: S,
    pub x_max: S,
    pub t_min: S,
    pub t_max: S,
}

impl<S: Scalar> Domain<S> {
    pub fn new(x_min: S, x_max: S, t_min: S, t_max: S) -> Result<Self> {
        if !(x_min < x_max && t_min < t_max) {
            return Err(CoreError::Config(format!(
                "domain must have x_min < x_max and t_min < t_max, got [{x_min}, {x_max}] x [{t_min}, {t_max}]"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && t_min.is_finite() && t_max.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "domain bounds",
                index: None,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            t_min,
            t_max,
        })
    }

    /// `[0, 2*pi] x [0, t_max]`, the box used by all benchmark systems.
    pub fn standard(t_max: S) -> Result<Self> {
        Self::new(S::zero(), S::TAU(), S::zero(), t_max)
    }

    /// Scale factor of the affine map x -> [-1, 1].
    #[inline]
    pub fn x_scale(&self) -> S {
        S::from_f64(2.0) / (self.x_max - self.x_min)
    }

    /// Scale factor of the affine map t -> [-1, 1].
    #[inline]
    pub fn t_scale(&self) -> S {
        S::from_f64(2.0) / (self.t_max - self.t_min)
    }

    // Centered form so the midpoint maps to exactly 0.
    #[inline]
    pub fn norm_x(&self, x: S) -> S {
        let half = S::from_f64(0.5);
        (x - (self.x_min + self.x_max) * half) * self.x_scale()
    }

    #[inline]
    pub fn norm_t(&self, t: S) -> S {
        let half = S::from_f64(0.5);
        (t - (self.t_min + self.t_max) * half) * self.t_scale()
    }
}
