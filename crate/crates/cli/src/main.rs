//! `elc`: platoon lateral-control analysis and simulation.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use elc_core::io::{ConfigFile, ResolvedConfig};
use elc_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "elc", version, about = "Emergency lane change platoon control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Validate the configuration and print it resolved, without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the double-lane-change platoon simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Classify the gain grid at every speed and intersect.
    StabilityRegion {
        #[command(flatten)]
        common: Common,
        /// Restrict to these k_omega slices (repeatable).
        #[arg(long = "k-omega")]
        k_omega: Vec<f64>,
        /// Also write one CSV per speed.
        #[arg(long)]
        per_speed: bool,
    },
    /// Certify string stability over a sweep of weighting factors.
    StringStability {
        #[command(flatten)]
        common: Common,
        /// Weighting factors to certify (repeatable), overriding the config.
        #[arg(long)]
        alpha: Vec<f64>,
    },
    /// Fit a line/arc chain to a trace CSV with `x` and `y` columns.
    FitTrajectory {
        #[command(flatten)]
        common: Common,
        /// Trace CSV to fit.
        #[arg(long, short)]
        input: PathBuf,
        /// Residual threshold (m), overriding `[fit] threshold`.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Lateral perturbation of the lead on a straight road.
    Perturb {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common }
            | Command::StabilityRegion { common, .. }
            | Command::StringStability { common, .. }
            | Command::FitTrajectory { common, .. }
            | Command::Perturb { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::StabilityRegion { .. } => "stability-region",
            Command::StringStability { .. } => "string-stability",
            Command::FitTrajectory { .. } => "fit-trajectory",
            Command::Perturb { .. } => "perturb",
        }
    }
}

fn load(common: &Common) -> elc_core::Result<(ResolvedConfig, String)> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut cfg = file.resolve()?;
    let canonical = cfg.to_toml()?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok((cfg, canonical))
}

fn run(cli: Cli) -> elc_core::Result<()> {
    let started = std::time::Instant::now();
    let common = cli.command.common();
    let (cfg, canonical) = load(common)?;
    if common.dry_run {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let dir = cfg.output_dir.clone();
    elc_core::io::output::create_dir(&dir)?;
    let outputs = match &cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg, &dir)?,
        Command::StabilityRegion {
            k_omega, per_speed, ..
        } => commands::stability_region(&cfg, &dir, k_omega, *per_speed)?,
        Command::StringStability { alpha, .. } => commands::string_stability(&cfg, &dir, alpha)?,
        Command::FitTrajectory {
            input, threshold, ..
        } => commands::fit_trajectory(&cfg, &dir, input, *threshold)?,
        Command::Perturb { .. } => commands::perturb(&cfg, &dir)?,
    };
    let manifest = manifest::RunManifest::new(
        cli.command.name(),
        &canonical,
        &dir,
        &outputs,
        started.elapsed().as_secs_f64(),
    );
    manifest.write(&dir)?;
    println!("wrote {} files to {}", outputs.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}
