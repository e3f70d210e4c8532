//! Experiment configuration: a flat `key = value` text format in which every
//! key can also be set from the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::em::{EmConfig, VarianceUpdateMode};
use crate::error::{Error, Result};
use crate::gvamp::GvampConfig;

/// Full-scale problem size; `scale` multiplies both dimensions.
pub const FULL_M: usize = 8192;
pub const FULL_N: usize = 1024;
/// Variance of the signal entries and, at full scale, of the entries of `A`.
pub const DEFAULT_VARIANCE: f64 = std::f64::consts::SQRT_2;
pub const DESK_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Phaseless,
    Awgn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scale: f64,
    /// Explicit dimensions override `scale`.
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub prior_variance: f64,
    /// Total complex variance of each entry of `A`; defaults to the
    /// full-scale value divided by `scale`, which keeps `E|z_i|^2` and hence
    /// the SNR of each noise level independent of `scale`.
    pub a_variance: Option<f64>,
    pub channel: ChannelKind,
    pub sigma_true: Vec<f64>,
    pub sigma_init: Vec<f64>,
    /// When true, `sigma_init` entries are multiples of the true variance.
    pub init_relative: bool,
    pub seeds: Vec<u64>,
    pub em: bool,
    pub gvamp: GvampConfig,
    pub em_config: EmConfig,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scale: DESK_SCALE,
            m: None,
            n: None,
            prior_variance: DEFAULT_VARIANCE,
            a_variance: None,
            channel: ChannelKind::Phaseless,
            sigma_true: vec![100.0, 75.0, 50.0, 25.0],
            sigma_init: vec![0.01, 0.1, 1.0, 10.0],
            init_relative: true,
            seeds: (1..=10).collect(),
            em: true,
            gvamp: GvampConfig::default(),
            em_config: EmConfig::default(),
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected on/off, got '{other}'"))),
    }
}

/// `1,2,5`, `1..4` (exclusive) and `1..=4` (inclusive), freely mixed.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b): (u64, u64) = (parse("seeds", a)?, parse("seeds", b)?);
            seeds.extend(a..=b);
        } else if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (parse("seeds", a)?, parse("seeds", b)?);
            seeds.extend(a..b);
        } else {
            seeds.push(parse("seeds", part)?);
        }
    }
    Ok(seeds)
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "scale",
        "m",
        "n",
        "prior_variance",
        "a_variance",
        "channel",
        "sigma_true",
        "sigma_init",
        "init_mode",
        "seeds",
        "em",
        "gvamp.max_iters",
        "gvamp.tol",
        "gvamp.damping",
        "gvamp.min_precision",
        "gvamp.max_precision",
        "em.max_iters",
        "em.tol",
        "em.mode",
        "em.inner_max_iters",
        "em.inner_tol",
        "em.inner_damping",
        "em.nu_floor",
        "output",
        "format",
    ];

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "scale" => self.scale = parse(key, value)?,
            "m" => self.m = Some(parse(key, value)?),
            "n" => self.n = Some(parse(key, value)?),
            "prior_variance" => self.prior_variance = parse(key, value)?,
            "a_variance" => self.a_variance = Some(parse(key, value)?),
            "channel" => {
                self.channel = match value {
                    "phaseless" => ChannelKind::Phaseless,
                    "awgn" => ChannelKind::Awgn,
                    _ => return Err(Error::Config(format!("channel: unknown '{value}'"))),
                }
            }
            "sigma_true" => self.sigma_true = parse_list(key, value)?,
            "sigma_init" => self.sigma_init = parse_list(key, value)?,
            "init_mode" => {
                self.init_relative = match value {
                    "relative" => true,
                    "absolute" => false,
                    _ => return Err(Error::Config(format!("init_mode: unknown '{value}'"))),
                }
            }
            "seeds" => self.seeds = parse_seeds(value)?,
            "em" => self.em = parse_bool(key, value)?,
            "gvamp.max_iters" => self.gvamp.max_iters = parse(key, value)?,
            "gvamp.tol" => self.gvamp.tol = parse(key, value)?,
            "gvamp.damping" => self.gvamp.damping = parse(key, value)?,
            "gvamp.min_precision" => self.gvamp.min_precision = parse(key, value)?,
            "gvamp.max_precision" => self.gvamp.max_precision = parse(key, value)?,
            "em.max_iters" => self.em_config.max_em_iters = parse(key, value)?,
            "em.tol" => self.em_config.em_tol = parse(key, value)?,
            "em.mode" => {
                self.em_config.variance_update_mode = match value {
                    "exact" => VarianceUpdateMode::Exact,
                    "highsnr" | "high_snr" => VarianceUpdateMode::HighSnr,
                    _ => return Err(Error::Config(format!("em.mode: unknown '{value}'"))),
                }
            }
            "em.inner_max_iters" => self.em_config.inner.max_iters = parse(key, value)?,
            "em.inner_tol" => self.em_config.inner.tol = parse(key, value)?,
            "em.inner_damping" => self.em_config.inner.damping = parse(key, value)?,
            "em.nu_floor" => self.em_config.nu_floor = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` document on top of `self`. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn rows(&self) -> usize {
        self.m.unwrap_or_else(|| (FULL_M as f64 * self.scale).round() as usize)
    }

    pub fn cols(&self) -> usize {
        self.n.unwrap_or_else(|| (FULL_N as f64 * self.scale).round() as usize)
    }

    pub fn operator_variance(&self) -> f64 {
        self.a_variance.unwrap_or(DEFAULT_VARIANCE / self.scale)
    }

    pub fn initial_variance(&self, sigma_true: f64, init: f64) -> f64 {
        if self.init_relative {
            init * sigma_true
        } else {
            init
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("scale {} must be positive", self.scale)));
        }
        let (m, n) = (self.rows(), self.cols());
        if n < 1 || m < n {
            return Err(Error::Config(format!("need M >= N >= 1, got {m}x{n}")));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be positive")))
            }
        };
        positive("prior_variance", self.prior_variance)?;
        positive("a_variance", self.operator_variance())?;
        if self.sigma_true.is_empty() || self.sigma_init.is_empty() {
            return Err(Error::Config("sigma_true and sigma_init must be nonempty".into()));
        }
        for &s in &self.sigma_true {
            positive("sigma_true", s)?;
        }
        for &s in &self.sigma_init {
            positive("sigma_init", s)?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        self.gvamp.validate()?;
        self.em_config.validate()?;
        Ok(())
    }

    /// The configuration as a `key = value` document that [`apply_str`]
    /// reads back to an equal value.
    ///
    /// [`apply_str`]: ExperimentConfig::apply_str
    pub fn to_kv_string(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("scale", format!("{:?}", self.scale));
        if let Some(m) = self.m {
            line("m", m.to_string());
        }
        if let Some(n) = self.n {
            line("n", n.to_string());
        }
        line("prior_variance", format!("{:?}", self.prior_variance));
        if let Some(a) = self.a_variance {
            line("a_variance", format!("{a:?}"));
        }
        line(
            "channel",
            match self.channel {
                ChannelKind::Phaseless => "phaseless",
                ChannelKind::Awgn => "awgn",
            }
            .into(),
        );
        line("sigma_true", join(&self.sigma_true));
        line("sigma_init", join(&self.sigma_init));
        line(
            "init_mode",
            if self.init_relative { "relative" } else { "absolute" }.into(),
        );
        line(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        line("em", if self.em { "on" } else { "off" }.into());
        line("gvamp.max_iters", self.gvamp.max_iters.to_string());
        line("gvamp.tol", format!("{:?}", self.gvamp.tol));
        line("gvamp.damping", format!("{:?}", self.gvamp.damping));
        line("gvamp.min_precision", format!("{:?}", self.gvamp.min_precision));
        line("gvamp.max_precision", format!("{:?}", self.gvamp.max_precision));
        line("em.max_iters", self.em_config.max_em_iters.to_string());
        line("em.tol", format!("{:?}", self.em_config.em_tol));
        line(
            "em.mode",
            match self.em_config.variance_update_mode {
                VarianceUpdateMode::Exact => "exact",
                VarianceUpdateMode::HighSnr => "highsnr",
            }
            .into(),
        );
        line("em.inner_max_iters", self.em_config.inner.max_iters.to_string());
        line("em.inner_tol", format!("{:?}", self.em_config.inner.tol));
        line("em.inner_damping", format!("{:?}", self.em_config.inner.damping));
        line("em.nu_floor", format!("{:?}", self.em_config.nu_floor));
        if let Some(p) = &self.output {
            line("output", p.display().to_string());
        }
        line(
            "format",
            match self.format {
                OutputFormat::Csv => "csv",
                OutputFormat::Json => "json",
            }
            .into(),
        );
        out
    }
}
