//! Small-instance self-checks behind `emgvamp oracle`. Each check compares a
//! library routine with an independent dense or brute-force computation.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::experiment::phase_corrected_nmse;
use crate::em::{m_step_awgn_variance, ThetaEstimate};
use crate::error::Result;
use crate::gvamp::{gvamp_run, GvampConfig, GvampStatus};
use crate::lmmse::lmmse_solve;
use crate::model::{channel_denoise, Channel, GlmModel, LinearOperator, Prior};
use crate::quadrature::gauss_legendre;
use crate::scalar::Field;
use crate::special::{bessel_i0_scaled, bessel_i1_scaled, bessel_ratio_r0, i0e, Kappa};

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn check_special() -> Result<Vec<OracleCheck>> {
    let k = 100.0;
    let expansion = 1.0 - 0.5 / k - 0.125 / (k * k) - 0.125 / (k * k * k);
    Ok(vec![
        OracleCheck {
            name: "scaled I0 and I1 at x = 1",
            error: rel(bessel_i0_scaled(1.0)?, 0.46575960759364043)
                .max(rel(bessel_i1_scaled(1.0)?, 0.20791041534970844)),
            tolerance: 1e-14,
        },
        OracleCheck {
            name: "Bessel ratio at 100 vs expansion",
            error: (bessel_ratio_r0(Kappa::new(k)?) - expansion).abs(),
            tolerance: 1e-8,
        },
    ])
}

fn random_complex_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, n, |_, _| Complex64::sample_normal(rng, 1.0 / n as f64))
}

fn random_complex_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| Complex64::sample_normal(rng, 1.0))
}

/// `(gamma I + tau A^H A) x = gamma r + tau A^H p` solved densely.
fn check_lmmse(rng: &mut ChaCha8Rng) -> Result<OracleCheck> {
    let (m, n) = (12, 7);
    let a = random_complex_matrix(rng, m, n);
    let r = random_complex_vector(rng, n);
    let p = random_complex_vector(rng, m);
    let (gamma, tau) = (0.7, 3.1);
    let op = LinearOperator::new(a.clone())?;
    let fast = lmmse_solve(&op, &r, gamma, &p, tau)?;
    let lhs = DMatrix::identity(n, n) * Complex64::new(gamma, 0.0) + a.ad_mul(&a) * Complex64::new(tau, 0.0);
    let rhs = &r * Complex64::new(gamma, 0.0) + a.ad_mul(&p) * Complex64::new(tau, 0.0);
    let dense = lhs.clone().lu().solve(&rhs).expect("positive definite system");
    let cov_trace = lhs.try_inverse().expect("invertible").trace().re;
    Ok(OracleCheck {
        name: "LMMSE stage vs dense normal equations",
        error: ((&fast.x2 - &dense).norm() / dense.norm())
            .max(rel(fast.alpha_x, gamma * cov_trace / n as f64)),
        tolerance: 1e-10,
    })
}

/// Gaussian prior and AWGN channel: GVAMP's fixed point is the Bayes-linear
/// estimate.
fn check_linear_gaussian(rng: &mut ChaCha8Rng) -> Result<OracleCheck> {
    let (m, n) = (64, 32);
    let (nu_x, nu_w) = (1.0, 0.05);
    let a = DMatrix::from_fn(m, n, |_, _| f64::sample_normal(rng, 1.0 / n as f64));
    let x = DVector::from_fn(n, |_, _| f64::sample_normal(rng, nu_x));
    let y = &a * &x + DVector::from_fn(m, |_, _| f64::sample_normal(rng, nu_w));
    let prior = Prior::Gaussian {
        mean: 0.0,
        variance: nu_x,
    };
    let channel = Channel::Awgn { noise_variance: nu_w };
    let model = GlmModel::new(Arc::new(LinearOperator::new(a.clone())?), prior, channel)?;
    let cfg = GvampConfig {
        tol: 1e-12,
        max_iters: 500,
        ..Default::default()
    };
    let run = gvamp_run(&model, &y, &ThetaEstimate::new(prior, channel)?, &cfg)?;
    let lhs = DMatrix::identity(n, n) / nu_x + a.transpose() * &a / nu_w;
    let dense = lhs.cholesky().expect("positive definite").solve(&(a.transpose() * &y / nu_w));
    let error = if run.status == GvampStatus::Converged {
        (&run.state.xhat - &dense).norm() / dense.norm()
    } else {
        f64::INFINITY
    };
    Ok(OracleCheck {
        name: "GVAMP linear-Gaussian vs dense Bayes estimate",
        error,
        tolerance: 1e-8,
    })
}

/// Scaled derivative of the expected AWGN log-likelihood at the M-step
/// output, by central differences in `ln nu`.
fn check_awgn_m_step(rng: &mut ChaCha8Rng) -> Result<OracleCheck> {
    let m = 40;
    let y = random_complex_vector(rng, m);
    let zhat = random_complex_vector(rng, m);
    let zeta = 2.5;
    let nu = m_step_awgn_variance(&y, &zhat, zeta, 1e-12)?;
    let resid: f64 = y.iter().zip(zhat.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / m as f64;
    let objective = |nu: f64| -nu.ln() - (resid + 1.0 / zeta) / nu;
    let h = 1e-5;
    let deriv = (objective(nu * (1.0 + h)) - objective(nu * (1.0 - h))) / (2.0 * h);
    Ok(OracleCheck {
        name: "AWGN variance M-step stationarity",
        error: deriv.abs(),
        tolerance: 1e-4,
    })
}

/// Phaseless posterior mean and variance by a tensor rule in polar
/// coordinates: Gauss-Legendre in the radius, uniform in the angle.
fn brute_phaseless(y: f64, p: Complex64, nu: f64, tau: f64) -> (Complex64, f64) {
    let spread = (1.0 / tau).sqrt().max(nu.sqrt());
    let hi = y.max(p.norm()) + 40.0 * spread;
    let (nodes, weights) = gauss_legendre(400);
    let angles = 512;
    let (mut z0, mut z1, mut z2) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    let log_peak = -(y - p.norm()).powi(2) / (nu + 1.0 / tau);
    for (&t, &w) in nodes.iter().zip(&weights) {
        let rho = 0.5 * hi * (t + 1.0);
        let radial = 0.5 * hi * w * rho * i0e(2.0 * y * rho / nu)
            * ((2.0 * y * rho - y * y - rho * rho) / nu).exp();
        for k in 0..angles {
            let theta = 2.0 * PI * k as f64 / angles as f64;
            let z = Complex64::from_polar(rho, theta);
            let dens = radial * (-tau * (z - p).norm_sqr() - log_peak).exp();
            z0 += dens;
            z1 += z * dens;
            z2 += rho * rho * dens;
        }
    }
    let mean = z1 / z0;
    (mean, z2 / z0 - mean.norm_sqr())
}

fn check_phaseless_denoiser(rng: &mut ChaCha8Rng) -> Result<OracleCheck> {
    let mut error: f64 = 0.0;
    for _ in 0..5 {
        let y: f64 = rng.random_range(0.2..4.0);
        let p = Complex64::from_polar(rng.random_range(0.1..4.0), rng.random_range(-PI..PI));
        let nu = rng.random_range(0.1..1.0);
        let tau = rng.random_range(0.5..4.0);
        let res = channel_denoise(
            &Channel::PhaselessAwgn { noise_variance: nu },
            &DVector::from_element(1, Complex64::new(y, 0.0)),
            &DVector::from_element(1, p),
            tau,
        )?;
        let (mean, var) = brute_phaseless(y, p, nu, tau);
        error = error
            .max((res.mean[0] - mean).norm() / mean.norm())
            .max(rel(res.avg_variance, var));
    }
    Ok(OracleCheck {
        name: "phaseless denoiser vs polar tensor quadrature",
        error,
        tolerance: 1e-6,
    })
}

fn check_nmse(rng: &mut ChaCha8Rng) -> Result<OracleCheck> {
    let x = random_complex_vector(rng, 16);
    let xhat = random_complex_vector(rng, 16);
    let fast = phase_corrected_nmse(&xhat, &x)?;
    let energy = x.norm_squared();
    let grid = (0..10_000)
        .map(|k| {
            let c = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 10_000.0);
            (&xhat * c - &x).norm_squared() / energy
        })
        .fold(f64::INFINITY, f64::min);
    Ok(OracleCheck {
        name: "phase-corrected NMSE vs phase grid",
        error: (fast - grid).abs(),
        tolerance: 1e-6,
    })
}

pub fn run_oracle_suite() -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut checks = check_special()?;
    checks.push(check_lmmse(&mut rng)?);
    checks.push(check_linear_gaussian(&mut rng)?);
    checks.push(check_awgn_m_step(&mut rng)?);
    checks.push(check_phaseless_denoiser(&mut rng)?);
    checks.push(check_nmse(&mut rng)?);
    Ok(checks)
}
