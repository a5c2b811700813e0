//! Command-line front end: configuration, output rendering and the
//! subcommands of the `pcmod` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Overrides, RunConfig};
use crate::output::{json, Bundle};
use crate::verify::{run_battery, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "pcmod", version, about = "Switched-phase coupling between detuned modes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Grid points per axis for maps and sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub grid: Option<usize>,
    /// Detuning.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Coupling magnitude.
    #[arg(long, global = true, value_name = "X")]
    pub kappa: Option<f64>,
    /// Relative phase of the second segment.
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Transfer counted as complete by `plan`.
    #[arg(long, global = true, value_name = "X")]
    pub threshold: Option<f64>,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            grid: self.grid,
            delta: self.delta,
            kappa: self.kappa,
            phi: self.phi,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory of a protocol: trajectory.csv and bloch.svg.
    Simulate,
    /// Two-step feasibility grid and its analytic boundary.
    Feasibility,
    /// Two-step transfer over both segment durations.
    TransferMap,
    /// Fewest-switch staircase reaching the threshold.
    Plan,
    /// Forward and backward response of the two-stage cascade.
    Isolator,
    /// Run the invariant battery and write report.json.
    Verify {
        /// Flip the sign convention of one propagator entry to check that
        /// the battery notices.
        #[arg(long)]
        inject_fault: bool,
    },
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Simulate => commands::simulate(cfg),
        Command::Feasibility => commands::feasibility(cfg),
        Command::TransferMap => commands::transfer_map_cmd(cfg),
        Command::Plan => commands::plan(cfg),
        Command::Isolator => commands::isolator(cfg),
        Command::Verify { inject_fault } => {
            let report = run_battery(&VerifyOptions {
                seed: cfg.seed,
                tolerances: cfg.tolerances,
                inject_fault,
            });
            let mut files = Bundle::default();
            files.add("report.json", json(&report)?);
            let summary = report
                .checks
                .iter()
                .map(|c| {
                    format!(
                        "{} {} (residual {:e}, tolerance {:e})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.residual,
                        c.tolerance
                    )
                })
                .chain(std::iter::once(report.adjudication.verdict.clone()))
                .collect();
            Ok(Outcome {
                files,
                ok: report.passed,
                summary,
            })
        }
    }
}

/// Resolves the configuration, runs the command and writes its files.
/// Returns whether the command met its goal.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = RunConfig::resolve(cli.flags.config.as_deref(), &cli.flags.overrides())?;
    let outcome = execute(cli.command, &cfg)?;
    let written = outcome.files.write(&cfg.out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(outcome.ok)
}
