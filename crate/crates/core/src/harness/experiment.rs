//! Simulation runs: one random instance per seed, then every
//! `(sigma_true, sigma_init)` cell on it with and without EM.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ChannelKind, ExperimentConfig};
use crate::em::{em_gvamp, EmStatus, ThetaEstimate};
use crate::error::{Error, Result};
use crate::gvamp::{gvamp_run, GvampStatus};
use crate::model::{sample_model, Channel, GlmModel, LinearOperator, Prior};
use crate::scalar::Field;

/// `min_c |c xhat - x|^2 / |x|^2` over unit-modulus `c`.
pub fn phase_corrected_nmse<T: Field>(xhat: &DVector<T>, x_true: &DVector<T>) -> Result<f64> {
    if xhat.len() != x_true.len() {
        return Err(Error::Dimension(format!(
            "xhat has length {}, x_true {}",
            xhat.len(),
            x_true.len()
        )));
    }
    let energy: f64 = x_true.iter().map(|v| v.modulus_squared()).sum();
    if energy == 0.0 {
        return Err(Error::InvalidParameter("x_true is zero".into()));
    }
    let inner: Complex64 = xhat
        .iter()
        .zip(x_true.iter())
        .map(|(a, b)| a.to_complex().conj() * b.to_complex())
        .sum();
    let c = if inner.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        inner / inner.norm()
    };
    let err: f64 = xhat
        .iter()
        .zip(x_true.iter())
        .map(|(a, b)| (c * a.to_complex() - b.to_complex()).norm_sqr())
        .sum();
    Ok(err / energy)
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub em_iter: usize,
    /// Noise variance the E-step of this iteration ran at.
    pub nu_hat: f64,
    pub nmse: f64,
    pub sweeps: usize,
    pub status: GvampStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub sigma_true: f64,
    /// Absolute initial noise variance.
    pub sigma_init: f64,
    pub em: bool,
    pub rows: Vec<RunRow>,
    /// EM termination status; plain runs map their GVAMP status onto it.
    pub status: EmStatus,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn final_row(&self) -> &RunRow {
        self.rows.last().expect("records always hold at least one row")
    }

    pub fn diverged(&self) -> bool {
        self.status == EmStatus::Diverged
    }
}

/// Measurement operator, signal and unit-variance noise for one seed. The
/// noise draw is shared by every noise level.
pub struct Instance {
    pub seed: u64,
    pub op: Arc<LinearOperator<Complex64>>,
    pub x: DVector<Complex64>,
    /// `(sigma_true, y)` for each configured noise level.
    pub measurements: Vec<(f64, DVector<Complex64>)>,
}

fn prior(cfg: &ExperimentConfig) -> Prior {
    Prior::CircularGaussian {
        mean: Complex64::new(0.0, 0.0),
        variance: cfg.prior_variance,
    }
}

fn channel(kind: ChannelKind, noise_variance: f64) -> Channel {
    match kind {
        ChannelKind::Phaseless => Channel::PhaselessAwgn { noise_variance },
        ChannelKind::Awgn => Channel::Awgn { noise_variance },
    }
}

/// Draws `A` from stream 1 of the seed; `x` and the noise come from
/// [`sample_model`] on stream 0, which draws the same `x` and the same
/// standard normals for every noise level.
pub fn make_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let (m, n) = (cfg.rows(), cfg.cols());
    let a_var = cfg.operator_variance();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let matrix = DMatrix::from_fn(m, n, |_, _| Complex64::sample_normal(&mut rng, a_var));
    let op = Arc::new(LinearOperator::new(matrix)?);
    let mut x = None;
    let mut measurements = Vec::with_capacity(cfg.sigma_true.len());
    for &sigma in &cfg.sigma_true {
        let model = GlmModel::new(op.clone(), prior(cfg), channel(cfg.channel, sigma))?;
        let sample = sample_model(&model, seed)?;
        x.get_or_insert(sample.x);
        measurements.push((sigma, sample.y));
    }
    Ok(Instance {
        seed,
        op,
        x: x.expect("sigma_true is nonempty"),
        measurements,
    })
}

/// Runs one cell. With `em` off this is a single GVAMP run at `sigma_init`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    inst: &Instance,
    sigma_index: usize,
    sigma_init: f64,
    em: bool,
) -> Result<RunRecord> {
    let start = Instant::now();
    let (sigma_true, y) = &inst.measurements[sigma_index];
    let model = GlmModel::new(inst.op.clone(), prior(cfg), channel(cfg.channel, *sigma_true))?;
    let theta0 = ThetaEstimate::new(prior(cfg), channel(cfg.channel, sigma_init))?;
    let (rows, status) = if em {
        let out = em_gvamp(&model, y, &theta0, &cfg.em_config, &cfg.gvamp)?;
        let rows = out
            .history
            .iter()
            .map(|it| {
                Ok(RunRow {
                    em_iter: it.em_iter,
                    nu_hat: it.theta.noise_variance(),
                    nmse: phase_corrected_nmse(&it.xhat, &inst.x)?,
                    sweeps: it.sweeps,
                    status: it.gvamp_status,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (rows, out.status)
    } else {
        let run = gvamp_run(&model, y, &theta0, &cfg.gvamp)?;
        let status = match run.status {
            GvampStatus::Converged => EmStatus::Converged,
            GvampStatus::MaxIters => EmStatus::MaxIters,
            GvampStatus::Diverged => EmStatus::Diverged,
        };
        let row = RunRow {
            em_iter: 0,
            nu_hat: sigma_init,
            nmse: phase_corrected_nmse(&run.state.xhat, &inst.x)?,
            sweeps: run.state.iteration,
            status: run.status,
        };
        (vec![row], status)
    };
    let wall_time = start.elapsed();
    log::info!(
        "seed {} sigma {} init {:.4e} em {}: {} after {} rows, nu_hat {:.4e}, nmse {:.4e}, {:.2?}",
        inst.seed,
        sigma_true,
        sigma_init,
        em,
        status.as_str(),
        rows.len(),
        rows.last().map_or(f64::NAN, |r| r.nu_hat),
        rows.last().map_or(f64::NAN, |r| r.nmse),
        wall_time
    );
    Ok(RunRecord {
        seed: inst.seed,
        sigma_true: *sigma_true,
        sigma_init,
        em,
        rows,
        status,
        wall_time,
    })
}

/// Every `(seed, sigma_true, sigma_init)` cell of `cfg`, in that nesting
/// order. Cells run on the rayon pool; results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    log::info!(
        "running {}x{} {:?}, {} seeds, em {}",
        cfg.rows(),
        cfg.cols(),
        cfg.channel,
        cfg.seeds.len(),
        cfg.em
    );
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let inst = make_instance(cfg, seed)?;
        let cells: Vec<(usize, f64)> = (0..cfg.sigma_true.len())
            .flat_map(|s| {
                cfg.sigma_init
                    .iter()
                    .map(move |&init| (s, init))
            })
            .collect();
        let batch = cells
            .par_iter()
            .map(|&(s, init)| {
                let sigma_init = cfg.initial_variance(cfg.sigma_true[s], init);
                run_cell(cfg, &inst, s, sigma_init, cfg.em)
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(batch);
    }
    Ok(records)
}
