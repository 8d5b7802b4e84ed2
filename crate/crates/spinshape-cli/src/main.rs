//! Command-line front end: exact and numerical spectra of a spin-1/2
//! particle in shape-invariant scalar and magnetic fields on a line.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::{CommandError, SectorChoice};
use config::{OutputFormat, RunConfig, Scheme};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "spinshape",
    version,
    about = "Bound states of a spin-1/2 particle in coupled scalar and magnetic fields",
    after_help = "Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.\n\
                  SPINSHAPE_THREADS caps the eigensolver worker count (default 1, deterministic)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON config file; command-line flags override individual fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Superpotential strength γ > 0
    #[arg(long)]
    gamma: Option<f64>,
    /// Transverse field strength β
    #[arg(long)]
    beta: Option<f64>,
    /// Amplitude λ of the profile g(z) = λ/cosh z
    #[arg(long)]
    lambda: Option<f64>,
    /// Box half-width L (domain is (−L, L))
    #[arg(long = "grid.half-width")]
    grid_half_width: Option<f64>,
    /// Number of interior grid nodes N
    #[arg(long = "grid.points")]
    grid_points: Option<usize>,
    /// How many of the lowest eigenvalues to extract
    #[arg(long = "solver.k-levels")]
    solver_k_levels: Option<usize>,
    /// Bisection tolerance relative to the spectral scale
    #[arg(long = "solver.tol")]
    solver_tol: Option<f64>,
    /// Discretization scheme
    #[arg(long = "solver.scheme", value_enum)]
    solver_scheme: Option<Scheme>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output file format
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(path) => {
                RunConfig::load(path).map_err(|e| CommandError::Config(format!("{e:#}")))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.grid_half_width {
            cfg.grid.half_width = v;
        }
        if let Some(v) = self.grid_points {
            cfg.grid.points = v;
        }
        if let Some(v) = self.solver_k_levels {
            cfg.solver.k_levels = v;
        }
        if let Some(v) = self.solver_tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = self.solver_scheme {
            cfg.solver.scheme = v;
        }
        if let Some(v) = &self.out {
            cfg.output.directory = v.clone();
        }
        if let Some(v) = self.format {
            cfg.output.format = v;
        }
        cfg.validate()
            .map_err(|e| CommandError::Config(format!("{e:#}")))?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form bound levels and the continuum threshold
    Levels {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Numerical spectrum with degeneracy clusters and analytic comparison
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Which partner Hamiltonian to diagonalize
        #[arg(long, value_enum, default_value = "minus")]
        sector: SectorChoice,
    },
    /// Run the verification suite; exits 4 if any check fails
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Sabotage control: inject the wrong constant (γ²+β² instead of
        /// γ²+β²/4) into the direct scheme; the spectrum check must fail
        #[arg(long = "typo-eq41")]
        typo_eq41: bool,
        /// Skip the 500-sample level-count property (quick smoke runs)
        #[arg(long = "skip-sweep")]
        skip_sweep: bool,
    },
    /// Export the level-n eigenspinor pair as plot-ready data
    Wavefunction {
        #[command(flatten)]
        common: CommonArgs,
        /// Bound-state index n
        #[arg(long, short = 'n', default_value_t = 0)]
        level: usize,
        /// Pair member (1 or 2); both when omitted
        #[arg(long)]
        member: Option<usize>,
        /// Also emit a gnuplot script referencing the CSV files
        #[arg(long)]
        gnuplot: bool,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Levels { common } => commands::cmd_levels(&common.resolve()?),
        Command::Spectrum { common, sector } => commands::cmd_spectrum(&common.resolve()?, sector),
        Command::Verify {
            common,
            typo_eq41,
            skip_sweep,
        } => commands::cmd_verify(&common.resolve()?, typo_eq41, skip_sweep),
        Command::Wavefunction {
            common,
            level,
            member,
            gnuplot,
        } => commands::cmd_wavefunction(&common.resolve()?, level, member, gnuplot),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
