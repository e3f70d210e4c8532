//! Fixtures shared by the benchmarks.

use emgvamp::harness::{make_instance, ExperimentConfig, Instance};

/// Desk-scale phaseless instance for `seed` with `em` off.
pub fn desk_instance(seed: u64) -> (ExperimentConfig, Instance) {
    let mut cfg = ExperimentConfig::default();
    cfg.em = false;
    cfg.sigma_true = vec![25.0];
    cfg.seeds = vec![seed];
    let inst = make_instance(&cfg, seed).expect("default config is valid");
    (cfg, inst)
}
