//! Generalized linear model `y ~ p(y | z)`, `z = A x`, `x ~ p(x)`: the linear
//! operator, separable priors and channels, and the scalar posterior
//! denoisers that the first GVAMP stage and the M-step are built from.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::RadialRule;
use crate::scalar::Field;
use crate::special::{i0e, one_minus_r0};

/// Dense `M x N` operator together with its thin SVD `A = U diag(s) V^H`.
///
/// The SVD is computed once on construction. Singular values below
/// `max(M, N) * s_max * 1e-12` are stored as exact zeros.
#[derive(Debug, Clone)]
pub struct LinearOperator<T: Field> {
    matrix: DMatrix<T>,
    u: DMatrix<T>,
    singular_values: DVector<f64>,
    v: DMatrix<T>,
    rank: usize,
}

impl<T: Field> LinearOperator<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        let (m, n) = matrix.shape();
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("empty operator {m}x{n}")));
        }
        if matrix.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "operator has non-finite entries".into(),
            ));
        }
        let svd = matrix.clone().svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v = svd.v_t.expect("svd computed with v_t").adjoint();
        let mut singular_values = svd.singular_values;
        let s_max = singular_values.max();
        let cutoff = m.max(n) as f64 * s_max * 1e-12;
        let mut rank = 0;
        for s in singular_values.iter_mut() {
            if *s > cutoff {
                rank += 1;
            } else {
                *s = 0.0;
            }
        }
        Ok(Self {
            matrix,
            u,
            singular_values,
            v,
            rank,
        })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Left singular vectors, `M x min(M, N)`.
    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    /// Right singular vectors, `N x min(M, N)`.
    pub fn v(&self) -> &DMatrix<T> {
        &self.v
    }

    /// Descending, with numerically-zero values set to 0.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        &self.matrix * x
    }

    pub fn apply_adjoint(&self, z: &DVector<T>) -> DVector<T> {
        self.matrix.ad_mul(z)
    }
}

/// Separable prior `p(x_j; theta_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Circular complex Gaussian; complex models only.
    CircularGaussian { mean: Complex64, variance: f64 },
    /// Real Gaussian; real models only.
    Gaussian { mean: f64, variance: f64 },
    /// Spike-and-slab: zero with probability `1 - sparsity`, otherwise a
    /// zero-mean Gaussian (circular for complex models) of the given variance.
    BernoulliGaussian { sparsity: f64, variance: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let variance = match *self {
            Prior::CircularGaussian { mean, variance } => {
                if !mean.re.is_finite() || !mean.im.is_finite() {
                    return Err(Error::InvalidParameter("prior mean not finite".into()));
                }
                variance
            }
            Prior::Gaussian { mean, variance } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter("prior mean not finite".into()));
                }
                variance
            }
            Prior::BernoulliGaussian { sparsity, variance } => {
                if !(sparsity > 0.0 && sparsity <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sparsity {sparsity} outside (0, 1]"
                    )));
                }
                variance
            }
        };
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior variance {variance} must be positive"
            )));
        }
        Ok(())
    }

    fn check_field<T: Field>(&self) -> Result<()> {
        match self {
            Prior::CircularGaussian { .. } if !T::IS_COMPLEX => Err(Error::Unsupported(
                "circular Gaussian prior on a real model".into(),
            )),
            Prior::Gaussian { .. } if T::IS_COMPLEX => Err(Error::Unsupported(
                "real Gaussian prior on a complex model".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn mean<T: Field>(&self) -> Result<T> {
        self.check_field::<T>()?;
        Ok(match *self {
            Prior::CircularGaussian { mean, .. } => T::from_complex(mean).expect("complex field"),
            Prior::Gaussian { mean, .. } => T::from_real(mean),
            Prior::BernoulliGaussian { .. } => T::zero(),
        })
    }

    /// `E|x_j - E x_j|^2` under the prior.
    pub fn variance(&self) -> f64 {
        match *self {
            Prior::CircularGaussian { variance, .. } | Prior::Gaussian { variance, .. } => variance,
            Prior::BernoulliGaussian { sparsity, variance } => sparsity * variance,
        }
    }

    pub fn sample<T: Field, R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<DVector<T>> {
        self.check_field::<T>()?;
        let mean = self.mean::<T>()?;
        Ok(match *self {
            Prior::CircularGaussian { variance, .. } | Prior::Gaussian { variance, .. } => {
                DVector::from_fn(n, |_, _| mean + T::sample_normal(rng, variance))
            }
            Prior::BernoulliGaussian { sparsity, variance } => DVector::from_fn(n, |_, _| {
                let active = rng.random::<f64>() < sparsity;
                let slab = T::sample_normal(rng, variance);
                if active {
                    slab
                } else {
                    T::zero()
                }
            }),
        })
    }
}

/// Separable measurement channel `p(y_i | z_i; theta_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    /// `y = z + w`.
    Awgn { noise_variance: f64 },
    /// `y = |z + w|` with circular complex `w`; complex models only.
    PhaselessAwgn { noise_variance: f64 },
}

impl Channel {
    pub fn noise_variance(&self) -> f64 {
        match *self {
            Channel::Awgn { noise_variance } | Channel::PhaselessAwgn { noise_variance } => {
                noise_variance
            }
        }
    }

    /// Same channel family with a different noise variance.
    pub fn with_noise_variance(&self, noise_variance: f64) -> Self {
        match self {
            Channel::Awgn { .. } => Channel::Awgn { noise_variance },
            Channel::PhaselessAwgn { .. } => Channel::PhaselessAwgn { noise_variance },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.noise_variance();
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {nu} must be positive"
            )));
        }
        Ok(())
    }

    fn check_field<T: Field>(&self) -> Result<()> {
        if matches!(self, Channel::PhaselessAwgn { .. }) && !T::IS_COMPLEX {
            return Err(Error::Unsupported(
                "phaseless channel on a real model".into(),
            ));
        }
        Ok(())
    }

    pub fn sample<T: Field, R: Rng + ?Sized>(&self, rng: &mut R, z: &DVector<T>) -> Result<DVector<T>> {
        self.check_field::<T>()?;
        let nu = self.noise_variance();
        Ok(match self {
            Channel::Awgn { .. } => z.map(|zi| zi + T::sample_normal(rng, nu)),
            Channel::PhaselessAwgn { .. } => {
                z.map(|zi| T::from_real((zi + T::sample_normal(rng, nu)).modulus()))
            }
        })
    }
}

/// Posterior mean of one block plus the average of its componentwise
/// posterior variances.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserResult<T: Field> {
    pub mean: DVector<T>,
    pub avg_variance: f64,
}

#[derive(Debug, Clone)]
pub struct GlmModel<T: Field> {
    pub op: Arc<LinearOperator<T>>,
    pub prior: Prior,
    pub channel: Channel,
}

impl<T: Field> GlmModel<T> {
    pub fn new(op: Arc<LinearOperator<T>>, prior: Prior, channel: Channel) -> Result<Self> {
        prior.validate()?;
        prior.check_field::<T>()?;
        channel.validate()?;
        channel.check_field::<T>()?;
        Ok(Self { op, prior, channel })
    }

    pub fn nrows(&self) -> usize {
        self.op.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.op.ncols()
    }
}

/// One draw `(x, z = A x, y)` from a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSample<T: Field> {
    pub x: DVector<T>,
    pub z: DVector<T>,
    pub y: DVector<T>,
}

pub fn sample_model<T: Field>(model: &GlmModel<T>, rng_seed: u64) -> Result<ModelSample<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let x = model.prior.sample::<T, _>(&mut rng, model.ncols())?;
    let z = model.op.apply(&x);
    let y = model.channel.sample(&mut rng, &z)?;
    Ok(ModelSample { x, z, y })
}

fn check_precision(func: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(domain(func, format!("precision = {value}")));
    }
    Ok(())
}

/// Posterior of `x ~ N(m, v)` observed through `r = x + N(0, 1/gamma)`.
#[inline]
fn gaussian_posterior<T: Field>(mean: T, variance: f64, r: T, gamma: f64) -> (T, f64) {
    let precision = 1.0 / variance + gamma;
    (
        (mean.unscale(variance) + r.scale(gamma)).unscale(precision),
        1.0 / precision,
    )
}

/// Posterior of `x_j` under `p(x_j) N(x_j; r_j, 1/gamma)`.
pub fn prior_denoise<T: Field>(prior: &Prior, r: &DVector<T>, gamma: f64) -> Result<DenoiserResult<T>> {
    check_precision("prior_denoise", gamma)?;
    prior.validate()?;
    prior.check_field::<T>()?;
    if r.is_empty() {
        return Err(Error::Dimension("empty input to prior_denoise".into()));
    }
    let n = r.len() as f64;
    match *prior {
        Prior::CircularGaussian { variance, .. } | Prior::Gaussian { variance, .. } => {
            let m = prior.mean::<T>()?;
            let mut avg_variance = 0.0;
            let mean = r.map(|ri| {
                let (mu, v) = gaussian_posterior(m, variance, ri, gamma);
                avg_variance = v;
                mu
            });
            Ok(DenoiserResult { mean, avg_variance })
        }
        Prior::BernoulliGaussian { sparsity, variance } => {
            let log_on = sparsity.ln();
            let log_off = (1.0 - sparsity).ln();
            let mut resp_sum = 0.0;
            let mut spread_sum = 0.0;
            let mut slab_var = 0.0;
            let mean = r.map(|ri| {
                let (mu, v) = gaussian_posterior(T::zero(), variance, ri, gamma);
                slab_var = v;
                let l1 = log_on + T::log_normal(ri, T::zero(), variance + 1.0 / gamma);
                let l0 = log_off + T::log_normal(ri, T::zero(), 1.0 / gamma);
                let top = l1.max(l0);
                let (w1, w0) = ((l1 - top).exp(), (l0 - top).exp());
                let pi = w1 / (w1 + w0);
                resp_sum += pi;
                spread_sum += pi * (1.0 - pi) * mu.modulus_squared();
                mu.scale(pi)
            });
            let avg_variance = slab_var * (resp_sum / n) + spread_sum / n;
            Ok(DenoiserResult { mean, avg_variance })
        }
    }
}

/// Posterior of `z_i` under `p(y_i | z_i) N(z_i; p_i, 1/tau)`.
///
/// For the phaseless channel the posterior factors in polar form: given
/// `|z_i|`, the phase is von Mises about `arg p_i`, so the mean is
/// `e^{j arg p_i} E[|z_i| R0(2 tau |p_i| |z_i|)]` and both radial expectations
/// are taken with a 64-point Gauss-Legendre rule on the radial posterior.
pub fn channel_denoise<T: Field>(
    channel: &Channel,
    y: &DVector<T>,
    p: &DVector<T>,
    tau: f64,
) -> Result<DenoiserResult<T>> {
    check_precision("channel_denoise", tau)?;
    channel.validate()?;
    channel.check_field::<T>()?;
    if y.len() != p.len() {
        return Err(Error::Dimension(format!(
            "y has length {}, p has length {}",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Dimension("empty input to channel_denoise".into()));
    }
    let nu = channel.noise_variance();
    match channel {
        Channel::Awgn { .. } => {
            let precision = 1.0 / nu + tau;
            let mean = y.zip_map(p, |yi, pi| (yi.unscale(nu) + pi.scale(tau)).unscale(precision));
            Ok(DenoiserResult {
                mean,
                avg_variance: 1.0 / precision,
            })
        }
        Channel::PhaselessAwgn { .. } => {
            let magnitudes = phaseless_magnitudes(y)?;
            let mut var_sum = 0.0;
            let mut mean = DVector::zeros(y.len());
            for (i, &yi) in magnitudes.iter().enumerate() {
                let (m, v) = phaseless_posterior(yi, p[i].modulus(), nu, tau);
                var_sum += v;
                mean[i] = if m == 0.0 {
                    T::zero()
                } else {
                    let pi = p[i];
                    pi.scale(m / pi.modulus())
                };
            }
            Ok(DenoiserResult {
                mean,
                avg_variance: var_sum / y.len() as f64,
            })
        }
    }
}

pub(crate) fn phaseless_magnitudes<T: Field>(y: &DVector<T>) -> Result<Vec<f64>> {
    y.iter()
        .map(|&yi| {
            let c = yi.to_complex();
            if c.im != 0.0 || !(c.re >= 0.0) || !c.re.is_finite() {
                Err(domain(
                    "phaseless channel",
                    format!("measurement {c} is not a nonnegative real"),
                ))
            } else {
                Ok(c.re)
            }
        })
        .collect()
}

/// Radial part of the phaseless posterior for one component: returns
/// `(|E z|, E|z - E z|^2)`.
fn phaseless_posterior(y: f64, p_abs: f64, nu: f64, tau: f64) -> (f64, f64) {
    let b = 2.0 * tau * p_abs;
    let rule = RadialRule::new(2.0 * y / nu, b, 1.0 / nu + tau);
    let mean_rho = rule.expect(|rho| rho);
    let var_rho = rule.expect(|rho| (rho - mean_rho) * (rho - mean_rho));
    if b == 0.0 {
        return (0.0, var_rho + mean_rho * mean_rho);
    }
    // |E z| = E[rho R0(b rho)] = E[rho] - gap
    let gap = rule.expect(|rho| rho * one_minus_r0(b * rho));
    let radial_mean = mean_rho - gap;
    (radial_mean, var_rho + gap * (mean_rho + radial_mean))
}

/// `ln p(y_i | z_i)`.
pub fn channel_loglike<T: Field>(channel: &Channel, y_i: T, z_i: T) -> Result<f64> {
    channel.validate()?;
    channel.check_field::<T>()?;
    let nu = channel.noise_variance();
    match channel {
        Channel::Awgn { .. } => Ok(T::log_normal(y_i, z_i, nu)),
        Channel::PhaselessAwgn { .. } => {
            let y = y_i.to_complex();
            if !y.re.is_finite() || !y.im.is_finite() || y.im != 0.0 {
                return Err(domain(
                    "channel_loglike",
                    format!("measurement {y} is not real"),
                ));
            }
            let y = y.re;
            let z = z_i.modulus();
            if !z.is_finite() {
                return Err(domain("channel_loglike", "non-finite z"));
            }
            if y < 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let d = y - z;
            Ok((2.0 * y / nu).ln() - d * d / nu + i0e(2.0 * y * z / nu).ln())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circular_gaussian_prior_is_linear_shrinkage() {
        let prior = Prior::CircularGaussian {
            mean: c(0.0, 0.0),
            variance: 2.0,
        };
        let r = DVector::from_vec(vec![c(1.0, -1.0), c(0.5, 2.0)]);
        let gamma = 3.0;
        let out = prior_denoise(&prior, &r, gamma).unwrap();
        let shrink = 2.0 / (2.0 + 1.0 / gamma);
        for (m, ri) in out.mean.iter().zip(r.iter()) {
            assert!((m - ri * shrink).norm() < 1e-15);
        }
        let expect = 2.0 * (1.0 / gamma) / (2.0 + 1.0 / gamma);
        assert!((out.avg_variance - expect).abs() < 1e-15);
    }

    #[test]
    fn dense_bernoulli_gaussian_equals_gaussian_exactly() {
        let r = DVector::from_vec(vec![c(1.0, -1.0), c(0.5, 2.0), c(-3.0, 0.1)]);
        let g = prior_denoise(
            &Prior::CircularGaussian {
                mean: c(0.0, 0.0),
                variance: 1.7,
            },
            &r,
            0.9,
        )
        .unwrap();
        let bg = prior_denoise(
            &Prior::BernoulliGaussian {
                sparsity: 1.0,
                variance: 1.7,
            },
            &r,
            0.9,
        )
        .unwrap();
        assert_eq!(g, bg);

        let r = DVector::from_vec(vec![0.3, -2.0, 7.0]);
        let g = prior_denoise(&Prior::Gaussian { mean: 0.0, variance: 0.4 }, &r, 5.0).unwrap();
        let bg = prior_denoise(
            &Prior::BernoulliGaussian {
                sparsity: 1.0,
                variance: 0.4,
            },
            &r,
            5.0,
        )
        .unwrap();
        assert_eq!(g, bg);
    }

    #[test]
    fn bernoulli_gaussian_survives_huge_precision() {
        let r = DVector::from_vec(vec![1e3, 0.0, -1e-3]);
        let out = prior_denoise(
            &Prior::BernoulliGaussian {
                sparsity: 0.1,
                variance: 1.0,
            },
            &r,
            1e10,
        )
        .unwrap();
        assert!(out.mean.iter().all(|m| m.is_finite()));
        assert!(out.avg_variance.is_finite() && out.avg_variance > 0.0);
        assert!((out.mean[0] - 1e3).abs() < 1e-3);
        assert_eq!(out.mean[1], 0.0);
    }

    #[test]
    fn field_mismatch_is_rejected() {
        let r = DVector::from_vec(vec![1.0]);
        let err = prior_denoise(
            &Prior::CircularGaussian {
                mean: c(0.0, 0.0),
                variance: 1.0,
            },
            &r,
            1.0,
        );
        assert!(matches!(err, Err(Error::Unsupported(_))));
        let err = channel_denoise(
            &Channel::PhaselessAwgn { noise_variance: 1.0 },
            &r,
            &r,
            1.0,
        );
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn denoisers_reject_bad_precision() {
        let r = DVector::from_vec(vec![1.0]);
        let prior = Prior::Gaussian { mean: 0.0, variance: 1.0 };
        assert!(prior_denoise(&prior, &r, 0.0).is_err());
        assert!(prior_denoise(&prior, &r, -1.0).is_err());
        let ch = Channel::Awgn { noise_variance: 1.0 };
        assert!(channel_denoise(&ch, &r, &r, 0.0).is_err());
        assert!(channel_denoise(&ch, &r, &DVector::from_vec(vec![1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn awgn_channel_is_conjugate_gaussian() {
        let ch = Channel::Awgn { noise_variance: 0.5 };
        let y = DVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let p = DVector::from_vec(vec![c(0.0, 1.0), c(3.0, -1.0)]);
        let tau = 4.0;
        let out = channel_denoise(&ch, &y, &p, tau).unwrap();
        for i in 0..2 {
            let expect = (y[i] / 0.5 + p[i] * tau) / (1.0 / 0.5 + tau);
            assert!((out.mean[i] - expect).norm() < 1e-15);
        }
        assert!((out.avg_variance - 1.0 / (2.0 + tau)).abs() < 1e-15);
    }

    #[test]
    fn phaseless_zero_pseudo_mean_gives_zero_posterior_mean() {
        let ch = Channel::PhaselessAwgn { noise_variance: 0.3 };
        let y = DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]);
        let p = DVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let out = channel_denoise(&ch, &y, &p, 2.0).unwrap();
        assert_eq!(out.mean[0], c(0.0, 0.0));
        assert_eq!(out.mean[1], c(0.0, 0.0));
        assert!(out.avg_variance > 0.0);
    }

    #[test]
    fn phaseless_mean_keeps_the_pseudo_phase() {
        let ch = Channel::PhaselessAwgn { noise_variance: 0.25 };
        let p = DVector::from_vec(vec![c(1.5, 0.5), c(-0.2, -3.0), c(1e-9, 1e-9)]);
        let y = DVector::from_vec(vec![c(2.0, 0.0), c(0.1, 0.0), c(1.0, 0.0)]);
        let out = channel_denoise(&ch, &y, &p, 4.0).unwrap();
        for i in 0..3 {
            let dphase = (out.mean[i] / p[i]).arg();
            assert!(dphase.abs() < 1e-14, "component {i}: {dphase}");
        }
    }

    #[test]
    fn phaseless_rejects_negative_or_complex_measurements() {
        let ch = Channel::PhaselessAwgn { noise_variance: 1.0 };
        let p = DVector::from_vec(vec![c(1.0, 0.0)]);
        assert!(channel_denoise(&ch, &DVector::from_vec(vec![c(-1.0, 0.0)]), &p, 1.0).is_err());
        assert!(channel_denoise(&ch, &DVector::from_vec(vec![c(1.0, 1.0)]), &p, 1.0).is_err());
    }

    #[test]
    fn phaseless_loglike_at_zero_signal() {
        let ch = Channel::PhaselessAwgn { noise_variance: 0.7 };
        let (y, nu) = (1.3, 0.7);
        let got = channel_loglike(&ch, c(y, 0.0), c(0.0, 0.0)).unwrap();
        assert!((got - ((2.0 * y / nu).ln() - y * y / nu)).abs() < 1e-14);
        assert_eq!(
            channel_loglike(&ch, c(-0.1, 0.0), c(1.0, 0.0)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn awgn_loglike_is_gaussian() {
        let ch = Channel::Awgn { noise_variance: 2.0 };
        let got = channel_loglike(&ch, 1.0_f64, 0.0).unwrap();
        let expect = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - 0.25;
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn operator_svd_reconstructs() {
        let a = DMatrix::from_fn(6, 4, |i, j| c((i * 3 + j) as f64 * 0.1 - 0.7, (i as f64 - j as f64).sin()));
        let op = LinearOperator::new(a.clone()).unwrap();
        let s = DMatrix::from_diagonal(&op.singular_values().map(|s| c(s, 0.0)));
        let recon = op.u() * s * op.v().adjoint();
        assert!((recon - &a).norm() / a.norm() < 1e-12);
        let utu = op.u().adjoint() * op.u();
        assert!((utu - DMatrix::identity(4, 4)).norm() < 1e-12);
        let vtv = op.v().adjoint() * op.v();
        assert!((vtv - DMatrix::identity(4, 4)).norm() < 1e-12);
        let s = op.singular_values();
        assert!(s.iter().zip(s.iter().skip(1)).all(|(a, b)| a >= b));
    }

    #[test]
    fn rank_deficient_operator() {
        let col = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let a = DMatrix::from_columns(&[col.clone(), col.scale(2.0), col.scale(-1.0)]);
        let op = LinearOperator::new(a).unwrap();
        assert_eq!(op.rank(), 1);
        assert_eq!(op.singular_values()[1], 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = DMatrix::from_fn(5, 3, |i, j| c(i as f64 - j as f64, 0.5));
        let op = Arc::new(LinearOperator::new(a).unwrap());
        let model = GlmModel::new(
            op,
            Prior::CircularGaussian {
                mean: c(0.0, 0.0),
                variance: 1.0,
            },
            Channel::PhaselessAwgn { noise_variance: 0.1 },
        )
        .unwrap();
        let s1 = sample_model(&model, 42).unwrap();
        let s2 = sample_model(&model, 42).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(s1, sample_model(&model, 43).unwrap());
        assert!(s1.y.iter().all(|y| y.im == 0.0 && y.re >= 0.0));
        assert_eq!(s1.z, model.op.apply(&s1.x));
    }
}
