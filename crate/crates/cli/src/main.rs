use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, RunConfig};

/// Checks branching systems, their Cuntz-Krieger relations and the
/// Perron-Frobenius operator of the coarse map.
///
/// Exit status: 0 when every check passes, 1 on usage or configuration
/// errors, 2 when a mathematical check fails.
#[derive(Debug, Parser)]
#[command(name = "branchsys", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Builtin name (doubling, o-infinity, quadratic, standard) or a path to
    /// a system description.
    #[arg(long, global = true)]
    system: Option<String>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Grid cells.
    #[arg(long, global = true)]
    cells: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the six branching-system conditions.
    Validate,
    /// Check the Cuntz-Krieger relations on seeded random functions.
    Relations {
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Apply the Perron-Frobenius operator to a CSV grid function.
    Pf {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of branches in the sum.
        #[arg(short = 'n', long = "branches")]
        n: Option<usize>,
        /// Monte-Carlo samples for the oracle comparison.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Matrix of the operator on the span of the range indicators.
    MatrixRep {
        #[arg(long)]
        block: Option<usize>,
    },
    /// Iterate the operator towards an invariant density.
    Invariant {
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol_l1: Option<f64>,
    },
    /// Convergence of the partial sums over the branches.
    Truncation {
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write the resolved system as a description file.
    ExportSystem,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply(&Overrides {
        system: cli.system,
        n_max: cli.n_max,
        cells: cli.cells,
        seed: cli.seed,
        output_dir: cli.output_dir,
    });
    match &cli.command {
        Command::Relations { tol: Some(t) } => cfg.tolerances.relations = *t,
        Command::Pf { input, n, samples } => {
            if input.is_some() {
                cfg.pf.input = input.clone();
            }
            if n.is_some() {
                cfg.pf.n = *n;
            }
            if let Some(s) = samples {
                cfg.pf.samples = *s;
            }
        }
        Command::Invariant { max_iters, tol_l1 } => {
            if let Some(m) = max_iters {
                cfg.invariant.max_iters = *m;
            }
            if let Some(t) = tol_l1 {
                cfg.invariant.tol_l1 = *t;
            }
        }
        Command::Truncation { ns, input } => {
            if let Some(ns) = ns {
                cfg.truncation.ns = ns.clone();
            }
            if input.is_some() {
                cfg.truncation.input = input.clone();
            }
        }
        _ => {}
    }
    cfg.check()?;
    let sys = cfg.build_system()?;
    if !sys.aligned_with_grid(cfg.grid.cells) {
        eprintln!(
            "warning: breakpoints of `{}` do not fall on the {}-cell grid; expect discretization error",
            sys.name(),
            cfg.grid.cells
        );
    }
    match cli.command {
        Command::Validate => commands::validate(&cfg, &sys),
        Command::Relations { .. } => commands::relations(&cfg, &sys),
        Command::Pf { .. } => commands::pf(&cfg, &sys),
        Command::MatrixRep { block } => commands::matrix_rep(&cfg, &sys, block),
        Command::Invariant { .. } => commands::invariant(&cfg, &sys),
        Command::Truncation { .. } => commands::truncation(&cfg, &sys),
        Command::ExportSystem => commands::export_system(&cfg, &sys),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version land here too, and are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(2)
        }
    }
}
