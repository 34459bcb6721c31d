//! Command-line front end: configuration, experiment runs and output
//! manifests.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;
use unilateral::biped::Maneuver;
use unilateral::grid::GridSpec;

pub use config::RunConfig;
pub use error::CliError;

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: unilateral::Error| e.to_string())
}

fn parse_maneuver(s: &str) -> Result<Maneuver, String> {
    s.parse().map_err(|e: unilateral::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "unilateral", version, about = "Simulate and analyze biped touchdown and liftoff maneuvers")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed for sampled estimators.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Initial-pitch grid.
    #[arg(long, global = true, value_name = "LO:HI:COUNT", value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    #[arg(long, global = true, value_name = "touchdown|liftoff", value_parser = parse_maneuver)]
    pub maneuver: Option<Maneuver>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one maneuver and write its trajectory, events and mode timeline.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        theta0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        u1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        u2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        u12: Option<f64>,
    },
    /// Outcome curves under fixed inputs with their regularity reports.
    Sweep,
    /// Optimal value and policy curves with their regularity reports.
    Optimize,
    /// Policy-gradient steps from the optimum with several estimators.
    PgDemo,
    /// Re-hash the files of an output directory against its manifest.
    Verify {
        /// Directory to check; defaults to the output directory.
        dir: Option<PathBuf>,
    },
}

impl Cli {
    /// Loads the configuration file and applies flag overrides.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.maneuver {
            cfg.maneuver = m;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(d) = &self.out {
            cfg.out_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = Some(j);
        }
        if let Command::Simulate { theta0, u1, u2, u12 } = &self.command {
            if let Some(t) = theta0 {
                cfg.theta0 = *t;
            }
            let mut u = cfg.inputs();
            u.u1 = u1.unwrap_or(u.u1);
            u.u2 = u2.unwrap_or(u.u2);
            u.u12 = u12.unwrap_or(u.u12);
            cfg.inputs = Some(u);
        }
        Ok(cfg.resolve()?)
    }
}

/// Runs the parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    if let Command::Verify { dir } = &cli.command {
        let dir = dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
        let (manifest, bad) = manifest::verify(&dir)
            .map_err(|e| CliError::Config(format!("cannot read manifest in {}: {e}", dir.display())))?;
        if bad.is_empty() {
            info!("{} files match the manifest of '{}'", manifest.files.len(), manifest.command);
            println!("ok {} files", manifest.files.len());
            return Ok(());
        }
        for m in &bad {
            println!("mismatch {m:?}");
        }
        return Err(CliError::Run(format!("{} of {} files do not match", bad.len(), manifest.files.len())));
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
    let mut out = manifest::OutputDir::create(&cfg.out_dir)?;
    let name = match &cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Sweep => "sweep",
        Command::Optimize => "optimize",
        Command::PgDemo => "pg-demo",
        Command::Verify { .. } => unreachable!(),
    };
    pool.install(|| match &cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg, &mut out),
        Command::Sweep => commands::sweep_outcomes(&cfg, &mut out),
        Command::Optimize => commands::optimize(&cfg, &mut out),
        Command::PgDemo => commands::pg_demo(&cfg, &mut out),
        Command::Verify { .. } => unreachable!(),
    })?;
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::Run(e.to_string()))?;
    let files = out.finish(name, config)?;
    for f in &files {
        println!("{}/{}", cfg.out_dir.display(), f.path);
    }
    Ok(())
}
