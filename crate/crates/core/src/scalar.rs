//! Real scalar abstraction.
//!
//! Every numerical routine in the crate is written against [`Real`], with
//! complex quantities carried as [`num_complex::Complex<T>`]. Implementations
//! are provided for `f32` and `f64`; the working-precision thresholds that the
//! algorithms need (condition caps, overlap floors) are per-type constants so
//! that they stay meaningful when the precision changes.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point types usable as the real field of the complex matrices.
pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Default
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
{
    /// Condition number above which an eigenbasis is declared incomplete.
    const CONDITION_CAP: f64;
    /// Smallest admissible |<L|R>| before a pair is treated as coalesced.
    const OVERLAP_FLOOR: f64;

    /// Converts an `f64` literal. Panics only for values the type cannot hold,
    /// which never happens for the literals used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const CONDITION_CAP: f64 = 1e12;
    const OVERLAP_FLOOR: f64 = 1e-14;
}

impl Real for f32 {
    const CONDITION_CAP: f64 = 1e5;
    const OVERLAP_FLOOR: f64 = 1e-6;
}

/// Shorthand for the complex field over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// Complex value from `f64` parts.
#[inline]
pub fn cl<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut t = theta % two_pi;
    if t <= -T::PI() {
        t += two_pi;
    } else if t > T::PI() {
        t -= two_pi;
    }
    t
}
