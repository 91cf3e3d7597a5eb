//! Command-line front end: simulation, lasing curves, thresholds, trace
//! fitting, lifetime/surface-velocity extraction and synthetic traces, all
//! driven by a sectioned key-value config (see `presets/`).
//!
//! Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 numerical
//! failure.

// Negated comparisons like `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod records;
mod trace_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Context};
use records::Format;

#[derive(Parser)]
#[command(
    name = "pclaser",
    version,
    about = "Nanocavity-laser rate-equation toolkit"
)]
struct Cli {
    /// Config file path or bundled preset name (unpassivated, passivated).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory for traces and records.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for anything stochastic; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Result-record encoding.
    #[arg(long, global = true, value_enum, default_value = "jsonl")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the rate equations from the dark state and write the state trace.
    Simulate {
        /// Stop time; defaults to two pulse periods (pulsed) or 30 ns (CW).
        #[arg(long)]
        t_end_ps: Option<f64>,
        /// Number of output samples.
        #[arg(long, default_value_t = 4000)]
        samples: usize,
    },
    /// Sweep the input power and write the steady-state lasing curve.
    LasingCurve {
        #[arg(long, default_value_t = 0.01)]
        min_uw: f64,
        #[arg(long, default_value_t = 1e6)]
        max_uw: f64,
        #[arg(long, default_value_t = 120)]
        points: usize,
        /// Linear power grid instead of logarithmic.
        #[arg(long)]
        linear: bool,
    },
    /// Numeric and closed-form threshold with the bracket terms broken out.
    Threshold {
        /// Second config to compare against; prints the threshold ratios.
        #[arg(long)]
        compare: Option<String>,
    },
    /// Fit a trace CSV with the configured model and write the best fit.
    FitTrace {
        /// Trace CSV (`time_ps,intensity` with `#` comments).
        #[arg(long)]
        trace: PathBuf,
    },
    /// Lifetime, surface-velocity and enhancement extraction from measured
    /// decay times, with the predicted threshold reduction.
    Extract {
        #[arg(long)]
        tau_bulk_before_ps: f64,
        #[arg(long)]
        tau_pc_before_ps: f64,
        #[arg(long)]
        tau_bulk_after_ps: f64,
        #[arg(long)]
        tau_pc_after_ps: f64,
        /// Non-lasing-cavity decay time, for the enhancement factor.
        #[arg(long)]
        tau_cav_ps: Option<f64>,
        /// Emission quenching factor; defaults to the config's [surface]
        /// value, else 0.2.
        #[arg(long)]
        f_pc: Option<f64>,
        /// Hole radius; defaults to the config's [surface] value, else 120 nm.
        #[arg(long)]
        radius_nm: Option<f64>,
    },
    /// Generate a seeded synthetic trace from the configured model.
    Synth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pclaser: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    let load_ctx = || Context::load(cli.config.as_deref(), &cli.out, cli.seed, cli.format, argv);
    match &cli.command {
        Command::Simulate { t_end_ps, samples } => {
            commands::simulate(&load_ctx()?, *t_end_ps, *samples)
        }
        Command::LasingCurve {
            min_uw,
            max_uw,
            points,
            linear,
        } => commands::lasing_curve(&load_ctx()?, *min_uw, *max_uw, *points, *linear),
        Command::Threshold { compare } => commands::threshold(&load_ctx()?, compare.as_deref()),
        Command::FitTrace { trace } => commands::fit_trace(&load_ctx()?, trace),
        Command::Extract {
            tau_bulk_before_ps,
            tau_pc_before_ps,
            tau_bulk_after_ps,
            tau_pc_after_ps,
            tau_cav_ps,
            f_pc,
            radius_nm,
        } => {
            // config optional here: it only supplies the threshold template
            let ctx = match cli.config.as_deref() {
                Some(_) => Some(load_ctx()?),
                None => None,
            };
            commands::extract(
                ctx.as_ref(),
                &cli.out,
                cli.format,
                cli.seed.unwrap_or(0),
                &commands::semantic_args(argv),
                *tau_bulk_before_ps,
                *tau_pc_before_ps,
                *tau_bulk_after_ps,
                *tau_pc_after_ps,
                *tau_cav_ps,
                *f_pc,
                *radius_nm,
            )
        }
        Command::Synth => commands::synth(&load_ctx()?),
    }
}
