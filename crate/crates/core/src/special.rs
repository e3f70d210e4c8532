//! Exponentially scaled modified Bessel functions and the quantities built on
//! them: the ratio `I1/I0`, the Laguerre function `L_{1/2}`, Rician moments and
//! the von Mises density.
//!
//! Raw `I0`/`I1` are never formed. Every evaluation goes through
//! `e^{-x} I_d(x)`, which stays in `(0, 1]` for all `x >= 0` while the raw
//! functions overflow near `x = 713`.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Below this argument the power series is summed; above it the large-argument
/// asymptotic expansion is used. At 20 the smallest asymptotic term is about
/// `e^{-40}`, well under double precision.
const SERIES_CUTOFF: f64 = 20.0;

/// Above this concentration `R0` is taken from its three-term expansion.
const R0_EXPANSION_CUTOFF: f64 = 1e8;

/// Concentration of a von Mises density.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(domain("Kappa::new", format!("kappa = {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_nonneg(func: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(domain(func, format!("x = {x}")));
    }
    Ok(())
}

/// `e^{-x} I0(x)`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0_scaled", x)?;
    Ok(i0e(x))
}

/// `e^{-x} I1(x)`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_nonneg("bessel_i1_scaled", x)?;
    Ok(i1e(x))
}

/// `R0(kappa) = I1(kappa) / I0(kappa)`, the mean resultant length of a von
/// Mises density.
pub fn bessel_ratio_r0(kappa: Kappa) -> f64 {
    r0(kappa.0)
}

/// `L_{1/2}(x) = e^{x/2} [(1 - x) I0(-x/2) - x I1(-x/2)]` for `x <= 0`.
pub fn laguerre_half(x: f64) -> Result<f64> {
    if !x.is_finite() || x > 0.0 {
        return Err(domain("laguerre_half", format!("x = {x}")));
    }
    Ok(laguerre_half_unchecked(x))
}

/// First two moments of the Rician magnitude `|z|` for `z ~ CN(zhat, 1/precision)`.
///
/// Returns `(E|z|, E|z|^2)`.
pub fn rician_moments(zhat_abs: f64, precision: f64) -> Result<(f64, f64)> {
    if !precision.is_finite() || precision <= 0.0 {
        return Err(domain("rician_moments", format!("precision = {precision}")));
    }
    check_nonneg("rician_moments", zhat_abs)?;
    Ok(rician_moments_unchecked(zhat_abs, precision))
}

/// Normalized von Mises density at `theta` with mean direction `phi`.
pub fn von_mises_pdf(theta: f64, phi: f64, kappa: Kappa) -> Result<f64> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(domain(
            "von_mises_pdf",
            format!("theta = {theta}, phi = {phi}"),
        ));
    }
    let k = kappa.0;
    Ok((k * ((theta - phi).cos() - 1.0)).exp() / (2.0 * PI * i0e(k)))
}

pub(crate) fn laguerre_half_unchecked(x: f64) -> f64 {
    let h = -0.5 * x;
    (1.0 - x) * i0e(h) - x * i1e(h)
}

pub(crate) fn rician_moments_unchecked(zhat_abs: f64, precision: f64) -> (f64, f64) {
    let s = precision * zhat_abs * zhat_abs;
    let mean = (PI / (4.0 * precision)).sqrt() * laguerre_half_unchecked(-s);
    (mean, 1.0 / precision + zhat_abs * zhat_abs)
}

pub(crate) fn i0e(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        i0e_series(x)
    } else {
        asymptotic_scaled(0.0, x)
    }
}

pub(crate) fn i1e(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        i1e_series(x)
    } else {
        asymptotic_scaled(1.0, x)
    }
}

/// `e^{-x} sum_k (x^2/4)^k / (k!)^2`; all terms are positive.
fn i0e_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum * (-x).exp()
}

/// `e^{-x} (x/2) sum_k (x^2/4)^k / (k! (k+1)!)`.
fn i1e_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * (k + 1.0));
        sum += term;
        k += 1.0;
    }
    sum * (-x).exp()
}

/// `e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k`, summed until
/// the terms stop shrinking or fall below double precision.
fn asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Unscaled series sums `(S0, S1)` with `I_d(x) = S_d` for `x < SERIES_CUTOFF`.
/// The common `e^{-x}` factor cancels in every ratio, so it is not formed.
fn ratio_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let (mut t0, mut t1) = (1.0, 0.5 * x);
    let (mut s0, mut s1) = (t0, t1);
    let mut k = 1.0;
    while t0 > 1e-17 * s0 {
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        k += 1.0;
    }
    (s0, s1)
}

/// Asymptotic sums `(A0, A1, A0 - A1)` for `x >= SERIES_CUTOFF`, with the
/// difference accumulated term by term so `1 - R0` keeps full relative
/// precision at large `x`.
fn ratio_asymptotic(x: f64) -> (f64, f64, f64) {
    let (mut t0, mut t1) = (1.0_f64, 1.0_f64);
    let (mut a0, mut a1, mut diff) = (1.0, 1.0, 0.0);
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let scale = -1.0 / (8.0 * k as f64 * x);
        let n0 = t0 * scale * (0.0 - odd * odd);
        let n1 = t1 * scale * (4.0 - odd * odd);
        if n0.abs() >= t0.abs() || n1.abs() >= t1.abs() {
            break;
        }
        t0 = n0;
        t1 = n1;
        a0 += t0;
        a1 += t1;
        diff += t0 - t1;
        if t0.abs().max(t1.abs()) < 1e-17 * diff.abs() {
            break;
        }
    }
    (a0, a1, diff)
}

pub(crate) fn r0(x: f64) -> f64 {
    if x > R0_EXPANSION_CUTOFF {
        let inv = 1.0 / x;
        1.0 - 0.5 * inv - 0.125 * inv * inv - 0.125 * inv * inv * inv
    } else if x < SERIES_CUTOFF {
        let (s0, s1) = ratio_series(x);
        s1 / s0
    } else {
        let (a0, a1, _) = ratio_asymptotic(x);
        a1 / a0
    }
}

/// `1 - R0(x)` without the cancellation of forming `R0` first.
pub(crate) fn one_minus_r0(x: f64) -> f64 {
    if x > R0_EXPANSION_CUTOFF {
        let inv = 1.0 / x;
        0.5 * inv + 0.125 * inv * inv + 0.125 * inv * inv * inv
    } else if x < SERIES_CUTOFF {
        let (s0, s1) = ratio_series(x);
        (s0 - s1) / s0
    } else {
        let (a0, _, diff) = ratio_asymptotic(x);
        diff / a0
    }
}

/// `R0'(x) = 1 - R0(x)/x - R0(x)^2`. Only used for curvature estimates, so the
/// cancellation at large `x` is tolerated; the result is clamped to `[0, 1/2]`.
pub(crate) fn r0_derivative(x: f64) -> f64 {
    if x < 1e-4 {
        return 0.5 - 3.0 * x * x / 16.0;
    }
    let r = r0(x);
    (1.0 - r / x - r * r).clamp(0.0, 0.5)
}
