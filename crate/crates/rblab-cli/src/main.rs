//! `rblab` — command-line front end for the single-qubit benchmarking laboratory.
//!
//! Five commands: `markov`, `decompose`, `simulate`, `sweep`, and `spectral`. Every run
//! writes its tables as CSV (or JSON with `--format json`) next to a `.manifest.json`
//! recording the command, the fully resolved configuration, the seed, the artifact
//! version, and start/end timestamps. Table bodies are byte-identical for identical
//! flags and seed regardless of `--threads`; wall-clock information lives only in the
//! manifest.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rblab_core::compile::GatesetKind;
use std::path::PathBuf;
use std::process::ExitCode;

/// Failure classes and their exit codes: usage/configuration errors exit 2, analysis
/// failures (a fit or iteration that cannot produce a result) exit 3, I/O failures
/// exit 1. Success exits 0.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Usage(String),
    Analysis(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Analysis(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Usage(m) | CliError::Analysis(m) => m,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GatesetArg {
    Clifford,
    Nist,
}

impl GatesetArg {
    pub fn kind(self) -> GatesetKind {
        match self {
            GatesetArg::Clifford => GatesetKind::Clifford,
            GatesetArg::Nist => GatesetKind::Nist,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rblab", version, about = "Single-qubit randomized-benchmarking laboratory")]
pub struct Cli {
    /// Root seed; all randomness in a command derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output base path; artifact extensions are appended (`<base>.csv`,
    /// `<base>.manifest.json`, ...). Defaults to `$RBLAB_OUTPUT_DIR/<command>`, or
    /// `./<command>` when the variable is unset.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Table format for every emitted artifact.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker-thread count (default: machine parallelism). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Distribution of the composite gate after m uniform quarter-π draws, with
    /// total-variation distances to the uniform laws on the two cosets.
    Markov {
        /// Largest circuit length to tabulate (must be ≥ 1).
        #[arg(long, default_value_t = 40)]
        max_m: u32,
    },

    /// Pulse decompositions of one gateset over one pulse row, with the mean
    /// noisy-pulse count checked against the reference target.
    Decompose {
        /// Pulse row 1–9.
        #[arg(long)]
        row: u8,

        #[arg(long, value_enum)]
        gateset: GatesetArg,

        /// One of `calibrated`, `global-min`, `global-min-nonempty`, `pauli-first`.
        /// `calibrated` picks the convention that reproduces the reference counts.
        #[arg(long, default_value = "calibrated")]
        convention: String,
    },

    /// One benchmarking experiment: simulate survival decays and fit them.
    Simulate(Box<SimulateArgs>),

    /// Infidelity comparison of the two protocols across error models and pulse rows.
    Sweep {
        /// Comma list from {over_rotation, z_rotation, dephasing}; default all three.
        #[arg(long)]
        models: Option<String>,

        /// Comma list of pulse rows 1–9; default all. An empty list emits a
        /// header-only table.
        #[arg(long)]
        rows: Option<String>,

        /// Comma list of circuit lengths; default 1,2,4,...,512.
        #[arg(long)]
        lengths: Option<String>,

        /// Random sequences per length; default 30.
        #[arg(long)]
        sequences: Option<u32>,

        /// Shots per (sequence, length); 0 means exact expectation values (default).
        #[arg(long)]
        shots: Option<u64>,
    },

    /// Eigenvalues of the sequence-averaged superoperator, the decay-recursion
    /// spectrum when the noise is gate-independent, and the perturbed-projector
    /// singular spread.
    Spectral {
        #[arg(long, value_enum)]
        gateset: GatesetArg,

        /// One of `ideal`, `depolarizing`, `diagonal`, `over_rotation`, `z_rotation`,
        /// `dephasing`.
        #[arg(long, default_value = "ideal")]
        noise: String,

        /// Pulse row for the pulse-level models.
        #[arg(long, default_value_t = 7)]
        row: u8,

        /// Model strength: the depolarizing decay parameter, over-rotation offset,
        /// stray-Z angle, or dephasing α. Pulse models fall back to their standard
        /// strengths when omitted.
        #[arg(long)]
        strength: Option<f64>,

        /// Comma triple `x,y,z` for `--noise diagonal`.
        #[arg(long)]
        xyz: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Flat key-value TOML config; any flag below overrides the matching file key.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// `srb` or `nist` (required here or in the config file).
    #[arg(long)]
    pub protocol: Option<String>,

    /// Comma list of circuit lengths.
    #[arg(long)]
    pub lengths: Option<String>,

    /// Random sequences per length.
    #[arg(long)]
    pub sequences: Option<u32>,

    /// Shots per (sequence, length); 0 means exact expectation values.
    #[arg(long)]
    pub shots: Option<u64>,

    /// One of `ideal`, `depolarizing`, `over_rotation`, `z_rotation`, `dephasing`.
    #[arg(long)]
    pub noise: Option<String>,

    /// Strength for the chosen model (depolarizing decay parameter, over-rotation
    /// offset, stray-Z angle, or dephasing α).
    #[arg(long)]
    pub noise_strength: Option<f64>,

    /// Pulse row 1–9; required by the pulse-level models.
    #[arg(long)]
    pub pulse_row: Option<u8>,

    /// Recover to |0⟩ or |1⟩ by a per-sequence coin (default true).
    #[arg(long)]
    pub randomized_recovery: Option<bool>,

    /// Draw each π-pulse sign instead of averaging the two signs.
    #[arg(long)]
    pub pi_sign_sampling: Option<bool>,

    /// Pin the fit baseline B to this value.
    #[arg(long)]
    pub fix_b: Option<f64>,

    /// Let the fit baseline B float (conflicts with --fix-b).
    #[arg(long, default_value_t = false)]
    pub free_b: bool,

    /// Drop lengths below this from the fit.
    #[arg(long)]
    pub min_fit_length: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Must happen before any parallel work touches the global pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
