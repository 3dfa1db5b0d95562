//! Batch front end for the teleportation toolkit. One subcommand per claim
//! cluster; every run writes a JSON summary with the conventions in force,
//! the hash of the exact config bytes, and per-check verdicts.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 invalid config or
//! flags, 3 numerical or output failure.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use fieldport_core::par;
use fieldport_core::propagator::Route;

use commands::RunError;

#[derive(Parser)]
#[command(
    name = "fieldport",
    version,
    about = "Scalar-field teleportation toolkit: propagator checks, measurement \
             completeness, amplitude scans, and the lattice limit"
)]
struct Cli {
    /// Cap worker threads (FIELDPORT_THREADS works too; the flag wins).
    /// Outputs are byte-identical regardless.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    /// Bessel closed form (the 1+1 kernel when spatial_dims = 1)
    ClosedForm,
    /// Direct mass-shell quadrature
    Quadrature,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::ClosedForm => Route::ClosedForm,
            RouteArg::Quadrature => Route::Quadrature,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scan the positive-frequency two-point function over a (t, r) window
    PropagatorScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
    },
    /// Verify the commutator vanishes at spacelike separation
    Microcausality {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
    },
    /// Fit the spacelike decay rate of the two-point function to the mass
    DecayFit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Completeness diagnostics for the lattice measurement families
    PovmCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan the teleportation amplitude over outcomes and observation points
    AmplitudeScan {
        #[arg(long)]
        config: PathBuf,
        /// Freeze the momentum shift instead of scanning grid.outcome
        #[arg(long = "P", allow_hyphen_values = true)]
        p_fixed: Option<f64>,
    },
    /// Channel structure and flat probability map in the lattice limit
    NrLimit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-dimensional shift-and-phase teleportation over random states
    TeleportQudit {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for the JSON summary
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Verify and report the realized sign, ordering, and grouping choices
    ConformanceReport {
        #[arg(long)]
        config: PathBuf,
    },
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    let chosen = match flag {
        Some(n) => Some(n),
        None => match std::env::var("FIELDPORT_THREADS") {
            Ok(s) => Some(s.parse::<usize>().map_err(|_| {
                format!("FIELDPORT_THREADS must be a positive integer, got `{s}`")
            })?),
            Err(_) => None,
        },
    };
    if chosen == Some(0) {
        return Err("thread cap must be >= 1".into());
    }
    Ok(chosen)
}

fn dispatch(command: &Command) -> Result<bool, RunError> {
    match command {
        Command::PropagatorScan { config, route } => {
            let ctx = commands::load_ctx(config)?;
            commands::propagator_scan(&ctx, route.map(Route::from))
        }
        Command::Microcausality { config, route } => {
            let ctx = commands::load_ctx(config)?;
            commands::microcausality(&ctx, route.map(Route::from))
        }
        Command::DecayFit { config } => {
            let ctx = commands::load_ctx(config)?;
            commands::decay_fit_cmd(&ctx)
        }
        Command::PovmCheck { config } => {
            let ctx = commands::load_ctx(config)?;
            commands::povm_check(&ctx)
        }
        Command::AmplitudeScan { config, p_fixed } => {
            let ctx = commands::load_ctx(config)?;
            commands::amplitude_scan(&ctx, *p_fixed)
        }
        Command::NrLimit { config } => {
            let ctx = commands::load_ctx(config)?;
            commands::nr_limit(&ctx)
        }
        Command::TeleportQudit {
            dim,
            trials,
            seed,
            out_dir,
        } => commands::teleport_qudit_cmd(*dim, *trials, *seed, out_dir),
        Command::ConformanceReport { config } => {
            let ctx = commands::load_ctx(config)?;
            commands::conformance_report(&ctx)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = match resolve_threads(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    match par::run_with_threads(threads, || dispatch(&cli.command)) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("one or more checks failed");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
