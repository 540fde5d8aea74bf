//! `lipconj`: JSON front end for lipconj-core.
//!
//! Every subcommand prints one JSON document to stdout; `--csv PATH` also
//! writes the tabular part for plotting. Exit codes: 0 success, 1 a checked
//! property failed, 2 invalid input, 3 a resource cap was hit.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lipconj_core::markov_chain::{CountMode, Estimator};

#[derive(Parser, Debug)]
#[command(name = "lipconj", version, about = "Lipschitz constants in conjugacy classes of interval maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Operations on a single piecewise-linear map.
    #[command(subcommand)]
    Map(MapCommand),
    /// Path counts, entropies and subeigenvectors of transition structures.
    #[command(subcommand)]
    Chain(ChainCommand),
    /// Residual checks.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Built-in worked examples.
    #[command(subcommand)]
    Example(ExampleCommand),
}

#[derive(Args, Debug)]
pub struct Sidecar {
    /// Also write the tabular part of the result to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum MapCommand {
    /// `Var f^n` and its n-th roots for n = 1..=N.
    Var {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// Exact Lipschitz constant of an interval map or lift.
    Lip {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// `#f^{-n}(x)` by branch inversion, optionally listing the points.
    Preimages {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Fail if a preimage leaves `lo,hi`.
        #[arg(long)]
        window: Option<String>,
        /// List the points as well as counting them.
        #[arg(long)]
        list: bool,
        #[arg(long, default_value_t = 1 << 20)]
        cap: usize,
    },
    /// Conjugate with Lipschitz constant at most `nu + epsilon` via the variation series.
    ConjugateVariation {
        #[arg(long = "in")]
        input: PathBuf,
        /// Variation growth rate of the map, as a rational.
        #[arg(long)]
        nu: String,
        #[arg(long, default_value = "1/10")]
        epsilon: String,
        /// Series truncation depth.
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Breakpoint depth of the table; chosen automatically when absent.
        #[arg(long)]
        table_depth: Option<usize>,
        #[arg(long, default_value_t = 1 << 14)]
        table_cap: usize,
        /// Also write the conjugate map alone to this file.
        #[arg(long)]
        g_out: Option<PathBuf>,
        #[command(flatten)]
        sidecar: Sidecar,
    },
}

#[derive(Args, Debug)]
pub struct ChainInput {
    /// Transition structure JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Anchor state: a label, `c`, or `c,s`.
    #[arg(long, default_value = "0")]
    pub anchor: String,
}

#[derive(Subcommand, Debug)]
pub enum ChainCommand {
    /// `p_ab^(n)`, `p_a·^(n)`, `p_·b^(n)` for n = 0..=N.
    Counts {
        #[command(flatten)]
        chain: ChainInput,
        /// Target state; defaults to the anchor.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value = "exact")]
        mode: CountMode,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// Gurevich, Salama and reverse Salama entropy estimates.
    Entropy {
        #[command(flatten)]
        chain: ChainInput,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value = "ratio")]
        estimator: Estimator,
        #[arg(long, default_value = "exact")]
        mode: CountMode,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// First-entrance and first-return counts with the convolution identity.
    Taboo {
        #[command(flatten)]
        chain: ChainInput,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// Series subeigenvector at `lambda`, its summability and verification.
    Subeig {
        #[command(flatten)]
        chain: ChainInput,
        #[arg(long)]
        lambda: String,
        /// Series depth.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Cells `lo:hi` to verify; defaults to `±n/6` around the anchor.
        #[arg(long)]
        window: Option<String>,
        /// Relative tolerance of the verification.
        #[arg(long, default_value = "1/10000")]
        tol: String,
        /// Divergence tolerance between depths n and 2n.
        #[arg(long, default_value_t = 1e-6)]
        divergence_tol: f64,
        /// Also report the characteristic threshold of a scalar band.
        #[arg(long)]
        perron: bool,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// Conjugacy of a Markov system built from a subeigenvector.
    Conjugate {
        /// Markov system JSON (`map` and `partition`).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lambda: String,
        /// Explicit entries for a finite partition, e.g. `1/2,1/2`.
        #[arg(long, conflicts_with = "vector")]
        v: Option<String>,
        /// Subeigenvector JSON.
        #[arg(long)]
        vector: Option<PathBuf>,
        /// Anchor of the series vector used when no vector is given.
        #[arg(long, default_value = "0")]
        anchor: String,
        /// Series depth of the constructed vector.
        #[arg(long, default_value_t = 300)]
        series_depth: usize,
        /// Refinement depth for interval systems.
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Mass allowed outside the window for lifts.
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        center: i64,
        #[arg(long, default_value_t = 1 << 16)]
        cap: usize,
        #[command(flatten)]
        sidecar: Sidecar,
    },
}

#[derive(Subcommand, Debug)]
pub enum CheckCommand {
    /// `sup |psi(f(x)) - g(psi(x))|` on an interior grid of `[lo, hi]`.
    Conjugacy {
        /// `power:<t>`, `psi:<t>`, or a map/lift/table JSON file.
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        psi: String,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value = "0")]
        lo: String,
        #[arg(long, default_value = "1")]
        hi: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Check on the nodes of the `psi` table instead of the grid.
        #[arg(long)]
        nodes: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExampleCommand {
    /// The countably-Markov lift with a gap between preimage growth and entropy.
    Gap {
        #[arg(long, default_value_t = 12)]
        n_counts: usize,
        #[arg(long, default_value_t = 200)]
        n_entropy: usize,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// Preimage growth of the full tent map.
    Tent {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value = "1/3,1/2,2/3")]
        x: String,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[command(flatten)]
        sidecar: Sidecar,
    },
    /// `x^2` conjugated to `x^t` by `psi_t`.
    Power {
        #[arg(long, default_value_t = 4.0)]
        t: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
