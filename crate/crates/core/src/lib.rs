//! EM-tuned GVAMP inference for generalized linear models, with the phaseless
//! (phase retrieval) channel and its noise-variance updates.

pub mod em;
pub mod error;
pub mod gvamp;
pub mod harness;
pub mod lmmse;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use em::{
    em_gvamp, m_step, m_step_awgn_variance, m_step_phaseless_variance_exact,
    m_step_phaseless_variance_highsnr, m_step_prior_gaussian, EmConfig, EmIteration, EmOutcome,
    EmStatus, InnerConfig, InnerSolve, ThetaEstimate, VarianceUpdateMode,
};
pub use error::{Error, Result};
pub use gvamp::{
    align_global_phase, gvamp_init, gvamp_iterate, gvamp_run, gvamp_run_from, GvampConfig,
    GvampRun, GvampState, GvampStatus, SweepTrace,
};
pub use lmmse::{lmmse_solve, LmmseResult};
pub use model::{
    channel_denoise, channel_loglike, prior_denoise, sample_model, Channel, DenoiserResult,
    GlmModel, LinearOperator, ModelSample, Prior,
};
pub use scalar::Field;
pub use special::{
    bessel_i0_scaled, bessel_i1_scaled, bessel_ratio_r0, laguerre_half, rician_moments,
    von_mises_pdf, Kappa,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
