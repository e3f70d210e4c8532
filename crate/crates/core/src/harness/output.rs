//! Result tables. The CSV layout is the interface the plotting scripts read.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat};
use super::experiment::RunRecord;
use crate::error::Result;

pub const CSV_COLUMNS: [&str; 8] = [
    "seed",
    "sigma_true",
    "sigma_init",
    "em_iter",
    "nu_hat",
    "nmse",
    "sweeps",
    "status",
];

/// How the element variance of `A` is read; written next to every result.
pub const A_VARIANCE_INTERPRETATION: &str =
    "total complex variance, split equally between real and imaginary parts";

/// 17 significant digits, enough to round-trip any `f64`.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for rec in records {
        for row in &rec.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                rec.seed,
                float(rec.sigma_true),
                float(rec.sigma_init),
                row.em_iter,
                float(row.nu_hat),
                float(row.nmse),
                row.sweeps,
                row.status.as_str()
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
pub struct Metadata<'a> {
    pub version: &'static str,
    pub m: usize,
    pub n: usize,
    pub a_variance: f64,
    pub a_variance_interpretation: &'static str,
    pub config: &'a ExperimentConfig,
}

impl<'a> Metadata<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            m: cfg.rows(),
            n: cfg.cols(),
            a_variance: cfg.operator_variance(),
            a_variance_interpretation: A_VARIANCE_INTERPRETATION,
            config: cfg,
        }
    }
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    metadata: Metadata<'a>,
    records: &'a [RunRecord],
}

/// Path of the metadata file written next to a CSV table.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes `records` to `path`. CSV output gets a `<path>.meta.json` sidecar;
/// JSON output embeds the metadata. Nothing time-dependent is written, so
/// identical configurations give identical files.
pub fn emit_results(
    records: &[RunRecord],
    path: &Path,
    format: OutputFormat,
    cfg: &ExperimentConfig,
) -> Result<()> {
    let meta = Metadata::new(cfg);
    match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(records, &mut buf)?;
            std::fs::write(path, buf)?;
            let mut sidecar = serde_json::to_vec_pretty(&meta)?;
            sidecar.push(b'\n');
            std::fs::write(metadata_path(path), sidecar)?;
        }
        OutputFormat::Json => {
            let doc = JsonDocument {
                metadata: meta,
                records,
            };
            let mut text = serde_json::to_vec_pretty(&doc)?;
            text.push(b'\n');
            std::fs::write(path, text)?;
        }
    }
    Ok(())
}
