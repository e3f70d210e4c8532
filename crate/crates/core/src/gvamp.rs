//! The GVAMP fixed-point iteration.
//!
//! Each sweep denoises both blocks under the separable belief `b1`, strips
//! the pseudo-prior contribution (Onsager correction) to obtain the inputs of
//! the Gaussian belief `b2`, solves `b2` exactly with [`lmmse_solve`], and
//! strips again on the way back. At a fixed point the means and average
//! variances of `b1`, `b2` and the Gaussian belief `q = N([xhat; zhat],
//! [I/eta; I/zeta])` coincide on both blocks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::em::ThetaEstimate;
use crate::error::{Error, Result};
use crate::lmmse::lmmse_solve;
use crate::model::{channel_denoise, prior_denoise, Channel, GlmModel};
use crate::scalar::Field;

const ALPHA_FLOOR: f64 = 1e-11;
const DIVERGENCE_STREAK: usize = 5;
const POWER_ITERATIONS: usize = 50;
const SPECTRAL_SEED: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvampConfig {
    pub max_iters: usize,
    /// Stop once `|xhat_k - xhat_{k-1}| / |xhat_k| <= tol`.
    pub tol: f64,
    /// Weight on the new messages, in `(0, 1]`. Means are mixed
    /// arithmetically, precisions geometrically.
    pub damping: f64,
    pub min_precision: f64,
    pub max_precision: f64,
}

impl Default for GvampConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            damping: 0.8,
            min_precision: 1e-11,
            max_precision: 1e11,
        }
    }
}

impl GvampConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if !(self.min_precision > 0.0 && self.min_precision < self.max_precision)
            || !self.max_precision.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "precision clamp [{}, {}] is not a positive interval",
                self.min_precision, self.max_precision
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!("tol {} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// The twelve EC quantities, plus the `b2` means and precisions kept for
/// moment-consistency checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GvampState<T: Field> {
    pub r1: DVector<T>,
    pub gamma1: f64,
    pub p1: DVector<T>,
    pub tau1: f64,
    pub r2: DVector<T>,
    pub gamma2: f64,
    pub p2: DVector<T>,
    pub tau2: f64,
    pub xhat: DVector<T>,
    pub eta: f64,
    pub zhat: DVector<T>,
    pub zeta: f64,
    /// Mean of `x` under `b2`.
    pub x2: DVector<T>,
    /// Mean of `z` under `b2`.
    pub z2: DVector<T>,
    /// `x` precision of `b2` (`N / tr Cov[x | b2]`).
    pub eta2: f64,
    /// `z` precision of `b2`.
    pub zeta2: f64,
    /// Sweeps completed since initialization.
    pub iteration: usize,
    clamp_streak: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GvampStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl GvampStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GvampStatus::Converged => "converged",
            GvampStatus::MaxIters => "max_iters",
            GvampStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    /// `|xhat_k - xhat_{k-1}| / |xhat_k|`; infinite on the first sweep after
    /// initialization.
    pub rel_change: f64,
    pub eta: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone)]
pub struct GvampRun<T: Field> {
    pub state: GvampState<T>,
    pub status: GvampStatus,
    pub trace: Vec<SweepTrace>,
}

fn check_inputs<T: Field>(model: &GlmModel<T>, y: &DVector<T>) -> Result<()> {
    if y.len() != model.nrows() {
        return Err(Error::Dimension(format!(
            "y has length {}, operator has {} rows",
            y.len(),
            model.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite measurement".into()));
    }
    Ok(())
}

/// Starting messages.
///
/// `r1` is the prior mean and `gamma1` the prior precision. For the AWGN
/// channel `p1 = 0` and `tau1 = 1/nu_w`. For the phaseless channel `p1 = A x0`
/// where `x0` is the leading eigenvector of `A^H diag(y^2) A` (power
/// iteration from a fixed seed), scaled to the prior's expected norm, and
/// `tau1` is the reciprocal of the average `|p1_i|^2`.
pub fn gvamp_init<T: Field>(
    model: &GlmModel<T>,
    y: &DVector<T>,
    theta: &ThetaEstimate,
) -> Result<GvampState<T>> {
    check_inputs(model, y)?;
    theta.validate()?;
    let (m, n) = (model.nrows(), model.ncols());
    let prior_mean = theta.prior.mean::<T>()?;
    let prior_var = theta.prior.variance();
    let r1 = DVector::from_element(n, prior_mean);
    let gamma1 = 1.0 / prior_var;

    let (p1, tau1) = match theta.channel {
        Channel::Awgn { noise_variance } => (DVector::zeros(m), 1.0 / noise_variance),
        Channel::PhaselessAwgn { .. } => {
            let energy = n as f64 * (prior_var + prior_mean.modulus_squared());
            let x0 = spectral_estimate(model, y, energy);
            let p1 = model.op.apply(&x0);
            let power = p1.norm_squared() / m as f64;
            let tau1 = if power > 0.0 { 1.0 / power } else { gamma1 };
            (p1, tau1)
        }
    };

    Ok(GvampState {
        r2: r1.clone(),
        gamma2: gamma1,
        p2: p1.clone(),
        tau2: tau1,
        xhat: r1.clone(),
        eta: gamma1,
        zhat: p1.clone(),
        zeta: tau1,
        x2: r1.clone(),
        z2: p1.clone(),
        eta2: gamma1,
        zeta2: tau1,
        r1,
        gamma1,
        p1,
        tau1,
        iteration: 0,
        clamp_streak: 0,
    })
}

fn spectral_estimate<T: Field>(model: &GlmModel<T>, y: &DVector<T>, energy: f64) -> DVector<T> {
    let n = model.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(SPECTRAL_SEED);
    let mut x: DVector<T> = DVector::from_fn(n, |_, _| T::sample_normal(&mut rng, 1.0));
    let weights = y.map(|yi| yi.modulus_squared());
    for _ in 0..POWER_ITERATIONS {
        let mut z = model.op.apply(&x);
        for (zi, &w) in z.iter_mut().zip(weights.iter()) {
            *zi = zi.scale(w);
        }
        let next = model.op.apply_adjoint(&z);
        let norm = next.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        x = next.unscale(norm);
    }
    let norm = x.norm();
    if norm > 0.0 {
        x.scale(energy.sqrt() / norm)
    } else {
        x
    }
}

fn clamp_alpha(alpha: f64) -> f64 {
    alpha.clamp(ALPHA_FLOOR, 1.0 - ALPHA_FLOOR)
}

/// Extrinsic message from a belief with mean `mean`, normalized sensitivity
/// `alpha`, computed from the input message `(input, precision)`.
fn onsager<T: Field>(mean: &DVector<T>, input: &DVector<T>, precision: f64, alpha: f64) -> (DVector<T>, f64) {
    let alpha = clamp_alpha(alpha);
    let out_precision = precision * (1.0 - alpha) / alpha;
    let out = mean.zip_map(input, |m, r| (m - r.scale(alpha)).unscale(1.0 - alpha));
    (out, out_precision)
}

struct Clamp {
    lo: f64,
    hi: f64,
    hit: bool,
}

impl Clamp {
    fn apply(&mut self, v: f64) -> f64 {
        if v.is_nan() || v < self.lo || v > self.hi {
            self.hit = true;
        }
        if v.is_nan() {
            self.lo
        } else {
            v.clamp(self.lo, self.hi)
        }
    }
}

fn all_finite<T: Field>(v: &DVector<T>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn relative_change<T: Field>(new: &DVector<T>, old: &DVector<T>) -> f64 {
    let diff = (new - old).norm();
    if diff == 0.0 {
        return 0.0;
    }
    let scale = new.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        f64::INFINITY
    }
}

/// One full sweep. Fails with [`Error::Diverged`] when a mean becomes
/// non-finite or a precision has needed clamping for five consecutive sweeps.
pub fn gvamp_iterate<T: Field>(
    state: &GvampState<T>,
    model: &GlmModel<T>,
    y: &DVector<T>,
    theta: &ThetaEstimate,
    cfg: &GvampConfig,
) -> Result<GvampState<T>> {
    let (m, n) = (model.nrows(), model.ncols());
    if state.r1.len() != n || state.p1.len() != m {
        return Err(Error::Dimension("state does not match model".into()));
    }
    let iteration = state.iteration + 1;
    let mut clamp = Clamp {
        lo: cfg.min_precision,
        hi: cfg.max_precision,
        hit: false,
    };

    // stage 1: separable denoisers, then extrinsic messages toward b2
    let dx = prior_denoise(&theta.prior, &state.r1, state.gamma1)?;
    let alpha_x = state.gamma1 * dx.avg_variance;
    let (r2, gamma2) = onsager(&dx.mean, &state.r1, state.gamma1, alpha_x);
    let gamma2 = clamp.apply(gamma2);

    let dz = channel_denoise(&theta.channel, y, &state.p1, state.tau1)?;
    let beta_z = state.tau1 * dz.avg_variance;
    let (p2, tau2) = onsager(&dz.mean, &state.p1, state.tau1, beta_z);
    let tau2 = clamp.apply(tau2);

    if !all_finite(&r2) || !all_finite(&p2) {
        return Err(Error::Diverged { iteration });
    }

    // stage 2: exact Gaussian belief b2, then extrinsic messages back to b1
    let lm = lmmse_solve(&model.op, &r2, gamma2, &p2, tau2)?;
    let (r1_new, gamma1_new) = onsager(&lm.x2, &r2, gamma2, lm.alpha_x);
    let (p1_new, tau1_new) = onsager(&lm.z2, &p2, tau2, lm.alpha_z);

    let d = cfg.damping;
    let mix = |new: &DVector<T>, old: &DVector<T>| new.zip_map(old, |a, b| a.scale(d) + b.scale(1.0 - d));
    let r1 = mix(&r1_new, &state.r1);
    let p1 = mix(&p1_new, &state.p1);
    let gamma1 = clamp.apply(gamma1_new.powf(d) * state.gamma1.powf(1.0 - d));
    let tau1 = clamp.apply(tau1_new.powf(d) * state.tau1.powf(1.0 - d));

    if !all_finite(&r1) || !all_finite(&p1) || !all_finite(&dx.mean) || !all_finite(&dz.mean) {
        return Err(Error::Diverged { iteration });
    }

    let clamp_streak = if clamp.hit { state.clamp_streak + 1 } else { 0 };
    if clamp_streak >= DIVERGENCE_STREAK {
        return Err(Error::Diverged { iteration });
    }

    Ok(GvampState {
        r1,
        gamma1,
        p1,
        tau1,
        r2,
        gamma2,
        p2,
        tau2,
        xhat: dx.mean,
        eta: 1.0 / dx.avg_variance,
        zhat: dz.mean,
        zeta: 1.0 / dz.avg_variance,
        eta2: gamma2 / clamp_alpha(lm.alpha_x),
        zeta2: tau2 / clamp_alpha(lm.alpha_z),
        x2: lm.x2,
        z2: lm.z2,
        iteration,
        clamp_streak,
    })
}

/// Runs [`gvamp_iterate`] from `state` until the relative change in `xhat`
/// drops to `cfg.tol` or `cfg.max_iters` sweeps have been made.
pub fn gvamp_run_from<T: Field>(
    mut state: GvampState<T>,
    model: &GlmModel<T>,
    y: &DVector<T>,
    theta: &ThetaEstimate,
    cfg: &GvampConfig,
) -> Result<GvampRun<T>> {
    cfg.validate()?;
    check_inputs(model, y)?;
    theta.validate()?;
    let mut trace = Vec::new();
    for _ in 0..cfg.max_iters {
        let fresh = state.iteration == 0;
        let next = match gvamp_iterate(&state, model, y, theta, cfg) {
            Ok(next) => next,
            Err(Error::Diverged { iteration }) => {
                log::debug!("gvamp diverged at sweep {iteration}");
                return Ok(GvampRun {
                    state,
                    status: GvampStatus::Diverged,
                    trace,
                });
            }
            Err(e) => return Err(e),
        };
        let rel_change = if fresh {
            f64::INFINITY
        } else {
            relative_change(&next.xhat, &state.xhat)
        };
        trace.push(SweepTrace {
            rel_change,
            eta: next.eta,
            zeta: next.zeta,
        });
        state = next;
        if rel_change <= cfg.tol {
            return Ok(GvampRun {
                state,
                status: GvampStatus::Converged,
                trace,
            });
        }
    }
    Ok(GvampRun {
        state,
        status: GvampStatus::MaxIters,
        trace,
    })
}

/// Cold-start run: [`gvamp_init`] followed by [`gvamp_run_from`].
pub fn gvamp_run<T: Field>(
    model: &GlmModel<T>,
    y: &DVector<T>,
    theta: &ThetaEstimate,
    cfg: &GvampConfig,
) -> Result<GvampRun<T>> {
    let state = gvamp_init(model, y, theta)?;
    gvamp_run_from(state, model, y, theta, cfg)
}

/// Rotates a complex estimate by the unit-modulus factor that best aligns it
/// with `reference`.
pub fn align_global_phase(estimate: &DVector<Complex64>, reference: &DVector<Complex64>) -> DVector<Complex64> {
    let inner = estimate.dotc(reference);
    if inner.norm() == 0.0 {
        return estimate.clone();
    }
    estimate * (inner / inner.norm())
}
