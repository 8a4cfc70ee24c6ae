use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "ccrflow", version, about = "Scaling flow on covariance forms of quasi-free CCR states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Output format; JSON unless stated otherwise, `verify` prints a table.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Seed for every random instance.
    #[arg(long, default_value_t = 42, global = true)]
    pub seed: u64,

    /// Tolerance override, `name=value` with name one of herm_rel, psd_rel,
    /// spec, degenerate_rel. Repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE", global = true)]
    pub tol: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// S^(r) for one value of r.
    Flow {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        r: f64,
    },
    /// Flow along an ascending r-grid with distances to the freeze limit.
    Trajectory {
        #[arg(long, short)]
        input: PathBuf,
        /// Comma-separated ascending grid; default 1, 2, 4, ..., 1024.
        #[arg(long, value_delimiter = ',')]
        r_grid: Option<Vec<f64>>,
    },
    /// Basis that brings S + conj S to the identity and sigma to canonical form.
    NormalForm {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Ratio spectrum and extremal / center-free / non-boundary flags.
    Classify {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Closed-form power of the Gaussian density of S.
    DensityPower {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        r: f64,
        /// liouville, euclidean or explicit:<m>.
        #[arg(long, default_value = "liouville")]
        measure: String,
    },
    /// Seeded property suites of every module; exit status 2 on failure.
    Verify,
    /// Fermionic flow C^r/(C^r + conj(C)^r) and its limits.
    Fermion {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        r: Option<f64>,
    },
}
