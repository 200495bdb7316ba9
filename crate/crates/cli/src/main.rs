use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ubcs_cli::{cmd_assign, cmd_equilibria, cmd_improvement, cmd_scheme, RunConfig, DEFAULT_GRID, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "ubcs", version, about = "Charge-and-subsidy path guidance for a single O-D network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// UE and SO link flows and times.
    Equilibria(Common),
    /// Per-path routing, VOT bounds and payments, plus verification.
    Scheme(Common),
    /// Per-VOT cost comparison against UE as CSV.
    Improvement(Common),
    /// Path guidance for every user in a roster CSV.
    Assign {
        #[command(flatten)]
        common: Common,
        /// CSV with columns user_id, role, vot.
        #[arg(long)]
        roster: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    vot: Option<PathBuf>,
    /// Number of VOT classes; defaults to the VOT file's value.
    #[arg(long)]
    classes: Option<usize>,
    /// Relative gap tolerance for the assignment solvers.
    #[arg(long, default_value_t = ubcs_core::equilibrium::DEFAULT_TOL)]
    tol: f64,
    /// VOT grid points for the cost report.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl From<Common> for RunConfig {
    fn from(c: Common) -> Self {
        RunConfig { network: c.network, vot: c.vot, classes: c.classes, tol: c.tol, grid: c.grid, seed: c.seed, out: c.out }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Equilibria(c) => cmd_equilibria(&c.into()),
        Command::Scheme(c) => cmd_scheme(&c.into()),
        Command::Improvement(c) => cmd_improvement(&c.into()),
        Command::Assign { common, roster } => cmd_assign(&common.into(), &roster),
    };
    match result {
        Ok(out) => {
            print!("{}", out.text);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: verification failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
