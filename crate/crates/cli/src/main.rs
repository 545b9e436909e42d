//! `odflow`: batch command-line front end for the travel demand engine.

mod commands;
mod config;

use std::io::{self, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand};
use odflow_core::ScenarioMode;
use serde_json::Value;

use crate::config::parse_assignment;

#[derive(Parser)]
#[command(
    name = "odflow",
    version,
    about = "Gravity-model OD matrices, scenario comparison and flow maps"
)]
pub struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand that reads the run configuration.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any configuration key, e.g. `--set rates.tb_rate=0.002`
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment, action = ArgAction::Append, global = true)]
    set: Vec<(String, Value)>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check a zone table against the schema
    Validate {
        #[arg(long)]
        zones: PathBuf,
    },

    /// Print yearly productions per zone and purpose as CSV
    Demand {
        #[arg(long)]
        zones: PathBuf,
    },

    /// Compute per-purpose and aggregate OD matrices for one scenario
    Compute {
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        scenario: Option<ScenarioArg>,
        /// Distance-decay exponent
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        school_days: Option<f64>,
        #[arg(long)]
        market_days: Option<f64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },

    /// Compare a without-connection and a with-connection OD matrix
    Compare {
        #[arg(long)]
        without: PathBuf,
        #[arg(long = "with")]
        with_: PathBuf,
        #[arg(long)]
        zones: PathBuf,
        /// Emit a flat JSON object instead of text
        #[arg(long)]
        json: bool,
    },

    /// Fit the distance-decay exponent to an observed OD matrix
    Calibrate {
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        #[arg(long)]
        scenario: Option<ScenarioArg>,
        /// Search range as LO:HI
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        json: bool,
    },

    /// Draw an OD matrix as an SVG flow map (and optionally GeoJSON)
    Render {
        #[arg(long)]
        od: PathBuf,
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        geojson: Option<PathBuf>,
        /// Comma-separated ascending class boundaries
        #[arg(long, value_delimiter = ',')]
        breaks: Option<Vec<f64>>,
        #[arg(long)]
        min_flow: Option<f64>,
        /// Second scenario whose cells join the default class breaks, so
        /// both maps share one legend
        #[arg(long)]
        shared_with: Option<PathBuf>,
    },

    /// Write nodes.csv and flows.csv for desktop flow-mapping tools
    ExportFlows {
        #[arg(long)]
        od: PathBuf,
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_flow: f64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ScenarioArg {
    Barrier,
    Connected,
}

impl From<ScenarioArg> for ScenarioMode {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Barrier => ScenarioMode::Barrier,
            ScenarioArg::Connected => ScenarioMode::Connected,
        }
    }
}

fn parse_range(text: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got `{text}`"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{s}` is not a number"))
    };
    Ok((parse(lo)?, parse(hi)?))
}

/// Terminal styling is on for interactive output unless `ODFLOW_NO_COLOR`
/// is set.
pub fn styling_enabled() -> bool {
    std::env::var_os("ODFLOW_NO_COLOR").is_none() && io::stdout().is_terminal()
}

fn main() -> ExitCode {
    let color = if std::env::var_os("ODFLOW_NO_COLOR").is_some() {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = Cli::command().color(color).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    match commands::run(cli.command, &cli.config, &mut out) {
        Ok(code) => {
            let _ = out.flush();
            code
        }
        Err(err) => {
            let _ = out.flush();
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("ERROR: {message}");
            ExitCode::FAILURE
        }
    }
}
