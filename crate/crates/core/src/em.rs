//! EM outer loop around GVAMP.
//!
//! The E-step is a GVAMP run at the current parameters; its Gaussian belief
//! `q` is plugged into the expected complete-data log-likelihood, which
//! separates into a prior term over `x` and a likelihood term over `z`. Each
//! M-step below maximizes one of those terms in closed form or, for the
//! phaseless channel, by solving its stationarity condition.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gvamp::{gvamp_init, gvamp_run_from, GvampConfig, GvampState, GvampStatus};
use crate::model::{phaseless_magnitudes, Channel, GlmModel, Prior};
use crate::quadrature::RadialRule;
use crate::scalar::Field;
use crate::special::{one_minus_r0, rician_moments_unchecked};

/// Current parameter estimate: prior parameters and channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub prior: Prior,
    pub channel: Channel,
}

impl ThetaEstimate {
    pub fn new(prior: Prior, channel: Channel) -> Result<Self> {
        let theta = Self { prior, channel };
        theta.validate()?;
        Ok(theta)
    }

    pub fn from_model<T: Field>(model: &GlmModel<T>) -> Self {
        Self {
            prior: model.prior,
            channel: model.channel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.channel.validate()
    }

    pub fn noise_variance(&self) -> f64 {
        self.channel.noise_variance()
    }

    /// Largest relative change over the scalar parameters.
    pub fn relative_change(&self, other: &ThetaEstimate) -> f64 {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        let mut change = rel(self.channel.noise_variance(), other.channel.noise_variance());
        change = change.max(rel(self.prior.variance(), other.prior.variance()));
        match (self.prior, other.prior) {
            (Prior::CircularGaussian { mean: a, .. }, Prior::CircularGaussian { mean: b, variance }) => {
                change = change.max((a - b).norm() / variance.sqrt());
            }
            (Prior::Gaussian { mean: a, .. }, Prior::Gaussian { mean: b, variance }) => {
                change = change.max((a - b).abs() / variance.sqrt());
            }
            (Prior::BernoulliGaussian { sparsity: a, .. }, Prior::BernoulliGaussian { sparsity: b, .. }) => {
                change = change.max(rel(a, b));
            }
            _ => change = f64::INFINITY,
        }
        change
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceUpdateMode {
    /// Solve the exact stationarity condition with the Bessel ratio `R0`.
    Exact,
    /// High-SNR form from `R0(k) ~ 1 - 1/(2k)`, via Rician moments.
    HighSnr,
}

/// Damped fixed-point solver settings for the exact phaseless update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 25,
            tol: 1e-6,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_em_iters: usize,
    /// Stop once the relative change in theta falls below this.
    pub em_tol: f64,
    pub variance_update_mode: VarianceUpdateMode,
    pub inner: InnerConfig,
    pub nu_floor: f64,
    pub learn_noise_variance: bool,
    /// Re-estimate the mean and variance of a Gaussian prior.
    pub learn_prior: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_em_iters: 20,
            em_tol: 1e-4,
            variance_update_mode: VarianceUpdateMode::Exact,
            inner: InnerConfig::default(),
            nu_floor: 1e-8,
            learn_noise_variance: true,
            learn_prior: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_floor > 0.0 && self.nu_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nu_floor {} must be positive",
                self.nu_floor
            )));
        }
        if !(self.inner.damping > 0.0 && self.inner.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inner damping {} outside (0, 1]",
                self.inner.damping
            )));
        }
        if self.em_tol.is_nan() || self.em_tol < 0.0 || self.inner.tol.is_nan() || self.inner.tol <= 0.0 {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn check_precision(func: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(domain(func, format!("precision = {v}")));
    }
    Ok(())
}

fn check_lengths<T: Field>(y: &DVector<T>, zhat: &DVector<T>) -> Result<()> {
    if y.len() != zhat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "y has length {}, zhat has length {}",
            y.len(),
            zhat.len()
        )));
    }
    Ok(())
}

/// `nu = (1/M) sum_i |y_i - zhat_i|^2 + 1/zeta`, floored.
pub fn m_step_awgn_variance<T: Field>(y: &DVector<T>, zhat: &DVector<T>, zeta: f64, floor: f64) -> Result<f64> {
    check_precision("m_step_awgn_variance", zeta)?;
    check_lengths(y, zhat)?;
    let resid: f64 = y.iter().zip(zhat.iter()).map(|(&a, &b)| (a - b).modulus_squared()).sum();
    Ok((resid / y.len() as f64 + 1.0 / zeta).max(floor))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolve {
    pub nu: f64,
    pub iterations: usize,
    /// False when the iterations ran out with the last relative step above
    /// ten times the tolerance.
    pub converged: bool,
}

/// Exact phaseless noise-variance update: the fixed point of
///
/// ```text
/// nu = (1/M) sum_i E[ y_i^2 + |z_i|^2 - 2 y_i |z_i| R0(2 y_i |z_i| / nu) ],   z_i ~ CN(zhat_i, 1/zeta),
/// ```
///
/// which is the stationarity condition of the expected Rician
/// log-likelihood in `nu`. The integrand depends on `|z_i|` only, so each
/// expectation is a radial integral under the Rician law of `|z_i|`. Solved by
/// damped fixed-point iteration from `nu_prev`.
pub fn m_step_phaseless_variance_exact<T: Field>(
    y: &DVector<T>,
    zhat: &DVector<T>,
    zeta: f64,
    nu_prev: f64,
    inner: &InnerConfig,
    floor: f64,
) -> Result<InnerSolve> {
    check_precision("m_step_phaseless_variance_exact", zeta)?;
    check_precision("m_step_phaseless_variance_exact", nu_prev)?;
    check_lengths(y, zhat)?;
    let mags = phaseless_magnitudes(y)?;
    let rules: Vec<RadialRule> = zhat
        .iter()
        .map(|z| RadialRule::new(0.0, 2.0 * zeta * z.modulus(), zeta))
        .collect();
    let m = mags.len() as f64;
    let update = |nu: f64| -> f64 {
        let total: f64 = mags
            .iter()
            .zip(&rules)
            .map(|(&yi, rule)| {
                if yi == 0.0 {
                    rule.expect(|rho| rho * rho)
                } else {
                    rule.expect(|rho| {
                        let d = yi - rho;
                        d * d + 2.0 * yi * rho * one_minus_r0(2.0 * yi * rho / nu)
                    })
                }
            })
            .sum();
        total / m
    };

    let mut nu = nu_prev.max(floor);
    let mut step = f64::INFINITY;
    for it in 1..=inner.max_iters {
        let next = ((1.0 - inner.damping) * nu + inner.damping * update(nu)).max(floor);
        step = ((next - nu) / nu).abs();
        nu = next;
        if step < inner.tol {
            return Ok(InnerSolve {
                nu,
                iterations: it,
                converged: true,
            });
        }
    }
    let converged = step <= 10.0 * inner.tol;
    if !converged {
        log::debug!(
            "exact variance update stopped after {} iterations with relative step {step:.3e}",
            inner.max_iters
        );
    }
    Ok(InnerSolve {
        nu,
        iterations: inner.max_iters,
        converged,
    })
}

/// High-SNR phaseless update
/// `nu = (2/M) sum_i [ y_i^2 - 2 y_i E|z_i| + E|z_i|^2 ]` with Rician moments.
pub fn m_step_phaseless_variance_highsnr<T: Field>(
    y: &DVector<T>,
    zhat: &DVector<T>,
    zeta: f64,
    floor: f64,
) -> Result<f64> {
    check_precision("m_step_phaseless_variance_highsnr", zeta)?;
    check_lengths(y, zhat)?;
    let mags = phaseless_magnitudes(y)?;
    let total: f64 = mags
        .iter()
        .zip(zhat.iter())
        .map(|(&yi, z)| {
            let (mean, second) = rician_moments_unchecked(z.modulus(), zeta);
            // y^2 - 2 y E[rho] + E[rho^2], regrouped to avoid cancellation
            (yi - mean) * (yi - mean) + (second - mean * mean)
        })
        .sum();
    Ok((2.0 * total / mags.len() as f64).max(floor))
}

/// Gaussian prior update: `mean = avg(xhat)`,
/// `variance = avg |xhat - mean|^2 + 1/eta`, floored.
pub fn m_step_prior_gaussian<T: Field>(xhat: &DVector<T>, eta: f64, floor: f64) -> Result<(T, f64)> {
    check_precision("m_step_prior_gaussian", eta)?;
    if xhat.is_empty() {
        return Err(Error::Dimension("empty xhat".into()));
    }
    let n = xhat.len() as f64;
    let mean = xhat.iter().fold(T::zero(), |acc, &v| acc + v).unscale(n);
    let spread: f64 = xhat.iter().map(|&v| (v - mean).modulus_squared()).sum();
    Ok((mean, (spread / n + 1.0 / eta).max(floor)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmStatus {
    Converged,
    MaxIters,
    /// Theta stopped moving while GVAMP had not converged.
    Stalled,
    Diverged,
}

impl EmStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EmStatus::Converged => "converged",
            EmStatus::MaxIters => "max_iters",
            EmStatus::Stalled => "stalled",
            EmStatus::Diverged => "diverged",
        }
    }
}

/// One E-step of the EM loop and the parameters it ran at.
#[derive(Debug, Clone)]
pub struct EmIteration<T: Field> {
    pub em_iter: usize,
    pub theta: ThetaEstimate,
    pub gvamp_status: GvampStatus,
    pub sweeps: usize,
    pub xhat: DVector<T>,
    /// `|xhat_k - xhat_{k-1}| / |xhat_k|` across EM iterations.
    pub xhat_change: f64,
    /// Whether the inner solve behind this iteration's theta converged.
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct EmOutcome<T: Field> {
    pub xhat: DVector<T>,
    pub zhat: DVector<T>,
    pub theta_hat: ThetaEstimate,
    pub state: GvampState<T>,
    pub status: EmStatus,
    pub history: Vec<EmIteration<T>>,
}

/// One M-step from the Gaussian belief in `state`.
pub fn m_step<T: Field>(
    state: &GvampState<T>,
    y: &DVector<T>,
    theta: &ThetaEstimate,
    cfg: &EmConfig,
) -> Result<(ThetaEstimate, bool)> {
    let mut next = *theta;
    let mut inner_converged = true;
    if cfg.learn_noise_variance {
        let nu = match theta.channel {
            Channel::Awgn { .. } => m_step_awgn_variance(y, &state.zhat, state.zeta, cfg.nu_floor)?,
            Channel::PhaselessAwgn { noise_variance } => match cfg.variance_update_mode {
                VarianceUpdateMode::Exact => {
                    let solve = m_step_phaseless_variance_exact(
                        y,
                        &state.zhat,
                        state.zeta,
                        noise_variance,
                        &cfg.inner,
                        cfg.nu_floor,
                    )?;
                    inner_converged = solve.converged;
                    solve.nu
                }
                VarianceUpdateMode::HighSnr => {
                    m_step_phaseless_variance_highsnr(y, &state.zhat, state.zeta, cfg.nu_floor)?
                }
            },
        };
        next.channel = theta.channel.with_noise_variance(nu);
    }
    if cfg.learn_prior {
        next.prior = match theta.prior {
            Prior::CircularGaussian { .. } => {
                let (mean, variance) = m_step_prior_gaussian(&state.xhat, state.eta, cfg.nu_floor)?;
                Prior::CircularGaussian {
                    mean: mean.to_complex(),
                    variance,
                }
            }
            Prior::Gaussian { .. } => {
                let (mean, variance) = m_step_prior_gaussian(&state.xhat, state.eta, cfg.nu_floor)?;
                Prior::Gaussian {
                    mean: mean.to_complex().re,
                    variance,
                }
            }
            Prior::BernoulliGaussian { .. } => {
                return Err(Error::Unsupported(
                    "EM for Bernoulli-Gaussian prior parameters".into(),
                ))
            }
        };
    }
    Ok((next, inner_converged))
}

/// EM-GVAMP. Each EM iteration runs GVAMP at the current theta, warm-started
/// from the previous state, then takes one M-step. `history[k]` describes the
/// E-step run at `theta^k`, so with `max_em_iters = 0` this is a plain GVAMP
/// run at `theta0`.
pub fn em_gvamp<T: Field>(
    model: &GlmModel<T>,
    y: &DVector<T>,
    theta0: &ThetaEstimate,
    em_cfg: &EmConfig,
    gvamp_cfg: &GvampConfig,
) -> Result<EmOutcome<T>> {
    em_cfg.validate()?;
    gvamp_cfg.validate()?;
    theta0.validate()?;
    let mut theta = *theta0;
    let mut state = gvamp_init(model, y, &theta)?;
    let mut history: Vec<EmIteration<T>> = Vec::new();
    let mut pending: Option<EmStatus> = None;
    let mut inner_converged = true;

    let status = loop {
        let k = history.len();
        let start = state.iteration;
        let run = gvamp_run_from(state, model, y, &theta, gvamp_cfg)?;
        state = run.state;
        let xhat_change = history.last().map_or(f64::INFINITY, |prev| {
            let scale = state.xhat.norm();
            let diff = (&state.xhat - &prev.xhat).norm();
            if diff == 0.0 {
                0.0
            } else {
                diff / scale
            }
        });
        history.push(EmIteration {
            em_iter: k,
            theta,
            gvamp_status: run.status,
            sweeps: state.iteration - start,
            xhat: state.xhat.clone(),
            xhat_change,
            inner_converged,
        });
        log::debug!(
            "em iter {k}: nu = {:.6e}, gvamp {} after {} sweeps",
            theta.noise_variance(),
            run.status.as_str(),
            state.iteration - start
        );

        if run.status == GvampStatus::Diverged {
            break EmStatus::Diverged;
        }
        if let Some(status) = pending {
            break status;
        }
        if k >= em_cfg.max_em_iters {
            break EmStatus::MaxIters;
        }

        let (next, converged) = m_step(&state, y, &theta, em_cfg)?;
        inner_converged = converged;
        let change = next.relative_change(&theta);
        theta = next;
        if change < em_cfg.em_tol {
            pending = Some(if run.status == GvampStatus::Converged {
                EmStatus::Converged
            } else {
                EmStatus::Stalled
            });
        }
    };

    Ok(EmOutcome {
        xhat: state.xhat.clone(),
        zhat: state.zhat.clone(),
        theta_hat: theta,
        state,
        status,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn awgn_update_limits() {
        let y = DVector::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5)]);
        assert!((m_step_awgn_variance(&y, &y, 4.0, 1e-8).unwrap() - 0.25).abs() < 1e-15);
        let zero = DVector::zeros(2);
        let mean_sq = (5.0 + 9.25) / 2.0;
        assert!((m_step_awgn_variance(&y, &zero, 1e300, 1e-8).unwrap() - mean_sq).abs() < 1e-12);
        assert!(m_step_awgn_variance(&y, &zero, 0.0, 1e-8).is_err());
    }

    #[test]
    fn prior_update_limits() {
        let x = DVector::from_vec(vec![c(0.5, -1.0); 4]);
        let (m, v) = m_step_prior_gaussian(&x, 2.0, 1e-8).unwrap();
        assert_eq!(m, c(0.5, -1.0));
        assert!((v - 0.5).abs() < 1e-15);
        let (_, v) = m_step_prior_gaussian(&DVector::from_vec(vec![3.0]), 0.25, 1e-8).unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn highsnr_update_at_zero_estimate() {
        let y = DVector::from_vec(vec![c(1.0, 0.0), c(2.5, 0.0), c(0.0, 0.0)]);
        let zhat = DVector::zeros(3);
        let zeta = 0.7;
        let got = m_step_phaseless_variance_highsnr(&y, &zhat, zeta, 1e-8).unwrap();
        let root = (std::f64::consts::PI / (4.0 * zeta)).sqrt();
        let expect: f64 = [1.0, 2.5, 0.0]
            .iter()
            .map(|&yi: &f64| yi * yi - 2.0 * yi * root + 1.0 / zeta)
            .sum::<f64>()
            * 2.0
            / 3.0;
        assert!((got - expect).abs() < 1e-13 * expect);
    }

    #[test]
    fn exact_update_with_zero_data_is_the_rayleigh_second_moment() {
        let y: DVector<Complex64> = DVector::zeros(4);
        let zhat = DVector::zeros(4);
        let zeta = 3.0;
        let solve =
            m_step_phaseless_variance_exact(&y, &zhat, zeta, 10.0, &InnerConfig::default(), 1e-8).unwrap();
        assert!(solve.converged);
        assert!((solve.nu - 1.0 / zeta).abs() < 1e-6 / zeta);
    }

    #[test]
    fn exact_update_is_phase_invariant() {
        let y = DVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0), c(0.2, 0.0)]);
        let zhat = DVector::from_vec(vec![c(0.8, 0.3), c(-2.0, 1.5), c(0.0, 0.1)]);
        let rot = Complex64::from_polar(1.0, 2.3);
        let inner = InnerConfig::default();
        let a = m_step_phaseless_variance_exact(&y, &zhat, 5.0, 0.5, &inner, 1e-8).unwrap();
        let b = m_step_phaseless_variance_exact(&y, &(&zhat * rot), 5.0, 0.5, &inner, 1e-8).unwrap();
        assert!((a.nu - b.nu).abs() < 1e-13 * a.nu);
    }

    #[test]
    fn exhausted_inner_iterations_are_flagged() {
        let y = DVector::from_vec(vec![c(10.0, 0.0), c(12.0, 0.0)]);
        let zhat = DVector::from_vec(vec![c(9.0, 0.0), c(0.0, 12.5)]);
        let inner = InnerConfig {
            max_iters: 2,
            ..Default::default()
        };
        let solve = m_step_phaseless_variance_exact(&y, &zhat, 100.0, 50.0, &inner, 1e-8).unwrap();
        assert!(!solve.converged);
        assert_eq!(solve.iterations, 2);
    }

    #[test]
    fn floors_apply() {
        let y = DVector::from_vec(vec![c(1.0, 0.0)]);
        assert_eq!(m_step_awgn_variance(&y, &y, 1e300, 0.5).unwrap(), 0.5);
        let z = DVector::from_vec(vec![c(1.0, 0.0)]);
        assert_eq!(m_step_phaseless_variance_highsnr(&y, &z, 1e12, 0.25).unwrap(), 0.25);
    }

    #[test]
    fn theta_relative_change() {
        let a = ThetaEstimate::new(
            Prior::CircularGaussian { mean: c(0.0, 0.0), variance: 1.0 },
            Channel::PhaselessAwgn { noise_variance: 2.0 },
        )
        .unwrap();
        let mut b = a;
        b.channel = b.channel.with_noise_variance(2.2);
        assert!((b.relative_change(&a) - 0.1).abs() < 1e-12);
        assert_eq!(a.relative_change(&a), 0.0);
    }
}
