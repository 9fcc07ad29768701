//! Command line front end. Every subcommand is one solver mode; flags feed
//! the shared config builder, or a --config file replaces them entirely.
//!
//! Exit codes: 0 clean, 2 invalid input or an oversized system, 3 when the
//! run finished but a sector failed or a comparison broke (partial output
//! is still written), 1 for anything unexpected.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinboot::config::{
    declared_mode, parse_measures, parse_sectors, validate_config, ConfigInput, Mode, RunConfig,
};
use spinboot::error::SpinbootError;
use spinboot::run::execute;

#[derive(Parser)]
#[command(
    name = "spinboot",
    version,
    about = "Spectrum and entanglement witnesses for a collective spin model,\n\
             solved from operator consistency constraints",
    after_help = "Thread count follows RAYON_NUM_THREADS; no other environment \
                  variable is consulted."
)]
struct Cli {
    #[command(subcommand)]
    mode: ModeCommand,
}

#[derive(Subcommand)]
enum ModeCommand {
    /// Solve via the consistency-constraint pipeline
    Bootstrap(RunArgs),
    /// Exact block diagonalization oracle
    OracleAm(RunArgs),
    /// Exact full diagonalization oracle (small systems)
    OracleEd(RunArgs),
    /// Run bootstrap and block oracle side by side and cross-check
    Compare(RunArgs),
    /// Single-generator warmup pipeline
    Toy(RunArgs),
}

impl ModeCommand {
    fn split(&self) -> (Mode, &RunArgs) {
        match self {
            ModeCommand::Bootstrap(a) => (Mode::Bootstrap, a),
            ModeCommand::OracleAm(a) => (Mode::OracleAm, a),
            ModeCommand::OracleEd(a) => (Mode::OracleEd, a),
            ModeCommand::Compare(a) => (Mode::Compare, a),
            ModeCommand::Toy(a) => (Mode::Toy, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Number of spins
    #[arg(long = "L", value_name = "SITES")]
    sites: Option<u32>,
    /// Anisotropy of the two-body coupling
    #[arg(long)]
    gamma: Option<f64>,
    /// Transverse field
    #[arg(long)]
    hx: Option<f64>,
    /// Longitudinal field
    #[arg(long)]
    hz: Option<f64>,
    /// "all" or a comma list of l values, e.g. "0,1" or "0.5,1.5"
    #[arg(long)]
    sectors: Option<String>,
    /// "all" or a comma list from: concurrence, tangle, residual, qfi, entropy
    #[arg(long)]
    measures: Option<String>,
    /// Output table path; plot files land next to it
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json (default csv, or inferred from --out extension)
    #[arg(long)]
    format: Option<String>,
    /// Nullspace cutoff, relative to the largest singular value
    #[arg(long)]
    tau_null: Option<f64>,
    /// Residual acceptance threshold
    #[arg(long)]
    tau_res: Option<f64>,
    /// Relative width for clustering degenerate energies
    #[arg(long)]
    tau_deg: Option<f64>,
    /// Config file (key=value lines or JSON) instead of flags
    #[arg(
        long,
        conflicts_with_all = [
            "sites", "gamma", "hx", "hz", "sectors", "measures",
            "out", "format", "tau_null", "tau_res", "tau_deg",
        ]
    )]
    config: Option<PathBuf>,
}

fn assemble(mode: Mode, args: &RunArgs) -> Result<RunConfig, SpinbootError> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        if let Some(declared) = declared_mode(&text) {
            if declared != mode {
                return Err(SpinbootError::InvalidConfig(format!(
                    "config file says mode={declared} but the {mode} subcommand was used"
                )));
            }
        }
        let mut cfg = validate_config(&text)?;
        cfg.mode = mode;
        cfg.validate()?;
        return Ok(cfg);
    }
    let input = ConfigInput {
        sites: args.sites,
        gamma: args.gamma,
        hx: args.hx,
        hz: args.hz,
        mode: Some(mode),
        sectors: args.sectors.as_deref().map(parse_sectors).transpose()?,
        measures: args.measures.as_deref().map(parse_measures).transpose()?,
        tau_null: args.tau_null,
        tau_res: args.tau_res,
        tau_deg: args.tau_deg,
        out: args.out.clone(),
        format: args.format.as_deref().map(str::parse).transpose()?,
    };
    input.build()
}

fn error_code(e: &SpinbootError) -> u8 {
    match e {
        // the Gram rank gate trips at a size threshold, so it is a size
        // limit of the method, not an internal fault
        SpinbootError::InvalidConfig(_)
        | SpinbootError::TooLarge { .. }
        | SpinbootError::SingularGram { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = cli.mode.split();
    let cfg = match assemble(mode, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_code(&e));
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
