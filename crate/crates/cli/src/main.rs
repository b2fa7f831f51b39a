//! `permboot` command line: simulate data, analyze datasets, evaluate limit
//! kernels, run verification experiments and the inverse-map counterexample.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "permboot",
    version,
    about = "Permutation and pooled-bootstrap empirical process toolkit"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "PERMBOOT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Output options shared by all subcommands.
#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file, written atomically. Defaults to `permboot-<subcommand>.<ext>`
    /// unless `--stdout` is given.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format (default depends on the subcommand).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also print the output on stdout.
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SeedArgs {
    /// Master seed, overriding the one in the config.
    #[arg(long, env = "PERMBOOT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataMode {
    Auto,
    Plain,
    Survival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurveArg {
    Ecdf,
    AtRisk,
    Uncensored,
    NelsonAalen,
    KaplanMeier,
    Wilcoxon,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one dataset from an experiment config and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArgs,
        /// Replicate index of the dataset.
        #[arg(long, default_value_t = 0)]
        rep: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Summaries of a CSV dataset: ECDFs and Wilcoxon, or Kaplan-Meier,
    /// Nelson-Aalen and RMST.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DataMode::Auto)]
        mode: DataMode,
        /// Horizon for survival data (default: largest observation time).
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Limit kernel matrices of the configured scenario on its first dataset.
    Kernel {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a verification experiment; exits 4 if any cell fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArgs,
        /// Resamples per dataset, overriding the config.
        #[arg(long)]
        draws: Option<usize>,
        /// Enumerate all permutations (N <= 8).
        #[arg(long)]
        exhaustive: bool,
        /// Run the linearization-residual experiment instead.
        #[arg(long)]
        linearization: bool,
        /// Additionally write the per-cell table as CSV.
        #[arg(long)]
        cells_csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Inverse-map counterexample table and increment-condition probe.
    Counterexample {
        /// Comma-separated values of n.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 4, 25, 100, 10_000])]
        n: Vec<u64>,
        /// Window constant K of the increment probe.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Dump a step function (ECDF, at-risk, Kaplan-Meier, ...) of a dataset.
    DumpFn {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DataMode::Auto)]
        mode: DataMode,
        #[arg(long = "fn", value_enum)]
        curve: CurveArg,
        /// Group label, or `pooled`.
        #[arg(long, default_value = "pooled")]
        group: String,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("permboot: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("permboot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
