use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use emgvamp::harness::{emit_results, run_experiment, run_oracle_suite, write_csv, ExperimentConfig};

/// EM-tuned GVAMP phase retrieval experiments.
#[derive(Parser)]
#[command(name = "emgvamp", disable_version_flag = true)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation study and write the result table.
    Run(RunArgs),
    /// Run the small-instance oracle checks.
    Oracle,
    /// Print the version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem size relative to 8192x1024.
    #[arg(long)]
    scale: Option<f64>,
    /// Run with (`on`) or without (`off`) EM.
    #[arg(long, value_name = "on|off")]
    em: Option<String>,
    /// Output path; the CSV goes to stdout when neither this nor the
    /// config's `output` is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "csv|json")]
    format: Option<String>,
    /// Override any config key, e.g. `--set gvamp.damping=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(scale) = self.scale {
            cfg.set("scale", &scale.to_string())?;
        }
        if let Some(em) = &self.em {
            cfg.set("em", em)?;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(format) = &self.format {
            cfg.set("format", format)?;
        }
        for kv in &self.overrides {
            let Some((key, value)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got '{kv}'");
            };
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.config()?;
    let records = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => emit_results(&records, path, cfg.format, &cfg)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&records, &mut lock)?;
            lock.flush()?;
        }
    }
    let diverged = records.iter().filter(|r| r.diverged()).count();
    if diverged > 0 {
        log::warn!("{diverged} of {} cells diverged", records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle() -> anyhow::Result<ExitCode> {
    let mut all = true;
    for check in run_oracle_suite()? {
        let verdict = if check.passed() { "PASS" } else { "FAIL" };
        all &= check.passed();
        println!(
            "{verdict} {} (error {:.3e}, tolerance {:.1e})",
            check.name, check.error, check.tolerance
        );
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::FAILURE;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Oracle => oracle(),
        Command::Version => {
            println!("emgvamp {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
