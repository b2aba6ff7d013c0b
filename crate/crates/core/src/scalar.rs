//! Scalar abstraction shared by the trust arithmetic.
//!
//! Everything in the cloud-model, inference and runtime maths is written
//! against [`Scalar`] so it can run in `f32` on constrained devices or in
//! `f64` for simulation and analysis.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub trait Scalar:
    Float + FromPrimitive + Default + Debug + Display + Sum<Self> + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot hold
    /// the value, which never happens for `f32`/`f64` constants used here.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from U[0, 1).
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from N(mean, sd²). A zero `sd` returns `mean` without
    /// consuming randomness.
    fn normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sd: Self) -> Self {
        if sd == Self::zero() {
            mean
        } else {
            mean + sd * Self::standard_normal(rng)
        }
    }

    fn clamp_unit(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                <StandardNormal as Distribution<$t>>::sample(&StandardNormal, rng)
            }

            #[inline]
            fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    )*};
}

impl_scalar!(f32, f64);
