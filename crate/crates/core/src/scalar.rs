//! Scalar fields the engine runs over: `f64` for real-valued models and
//! `Complex64` for circular complex models such as phase retrieval.
//!
//! Variances are always `E|x - m|^2`, so a circular complex Gaussian of
//! variance `v` has `v/2` per real component.

use std::f64::consts::PI;

use nalgebra::ComplexField;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub trait Field: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const IS_COMPLEX: bool;

    fn to_complex(self) -> Complex64;

    /// `None` when `c` has a nonzero imaginary part and `Self` is real.
    fn from_complex(c: Complex64) -> Option<Self>;

    /// Log-density of the (circular, for complex) Gaussian `N(x; mean, var)`.
    fn log_normal(x: Self, mean: Self, var: f64) -> f64;

    /// Zero-mean Gaussian draw with `E|w|^2 = var`.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Self;
}

impl Field for f64 {
    const IS_COMPLEX: bool = false;

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn from_complex(c: Complex64) -> Option<Self> {
        (c.im == 0.0).then_some(c.re)
    }

    fn log_normal(x: Self, mean: Self, var: f64) -> f64 {
        let d = x - mean;
        -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Self {
        let g: f64 = rng.sample(StandardNormal);
        g * var.sqrt()
    }
}

impl Field for Complex64 {
    const IS_COMPLEX: bool = true;

    fn to_complex(self) -> Complex64 {
        self
    }

    fn from_complex(c: Complex64) -> Option<Self> {
        Some(c)
    }

    fn log_normal(x: Self, mean: Self, var: f64) -> f64 {
        -(PI * var).ln() - (x - mean).norm_sqr() / var
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * (0.5 * var).sqrt()
    }
}
