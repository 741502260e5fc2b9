//! Command-line driver behind the `cdmd` binary.
//!
//! Exit codes: 0 success, 2 invalid input, 3 incompatible codec file version.

pub mod codec_file;
mod commands;
pub mod reference;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::selection::SiMethod;
use crate::symmetric::SymMode;

pub use codec_file::{codec_from_str, codec_to_string, load_codec, save_codec, FORMAT_VERSION};
pub use commands::{BoundRow, EvaluateRow, ScenarioFile, ScenarioRow};

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_VERSION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cdmd",
    version,
    about = "Distributed multiple-description codec design and simulation"
)]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a codec by deterministic annealing and write it to a file.
    Design(DesignArgs),
    /// Monte-Carlo evaluation of a codec file with side information.
    Evaluate(EvaluateArgs),
    /// Two-description rate-distortion bound with decoder side information.
    Bound(BoundArgs),
    /// Symmetric decoding over a random sensor field.
    Scenario(ScenarioArgs),
    /// Compare computed values with the embedded reference tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Index alphabet size of every description.
    #[arg(long, value_delimiter = ',', default_value = "4,4")]
    pub desc: Vec<usize>,
    /// Bit error rate of binary symmetric channels.
    #[arg(long, conflicts_with = "awgn")]
    pub bsc: Option<f64>,
    /// Noise power spectral density N0 of BPSK/AWGN channels.
    #[arg(long)]
    pub awgn: Option<f64>,
    /// Loss probability, one value or one per description.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DesignSettings {
    /// Source quantizer levels.
    #[arg(long = "K", default_value_t = 16)]
    pub k: usize,
    /// SI quantizer levels.
    #[arg(long = "n-si", default_value_t = 128)]
    pub n_si: usize,
    /// Correlation ladder used for the decoder tables.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "t-min-ratio")]
    pub t_min_ratio: Option<f64>,
    #[arg(long = "inner-tol")]
    pub inner_tol: Option<f64>,
    #[arg(long = "inner-cap")]
    pub inner_cap: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long = "init-entropy")]
    pub init_entropy_fraction: Option<f64>,
    #[arg(long)]
    pub perturbation: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub settings: DesignSettings,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Source/SI correlation the encoder is designed for.
    #[arg(long = "rho-enc", default_value_t = 0.8)]
    pub rho_enc: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub codec: PathBuf,
    /// Correlation of the simulated source and SI (default: the design value).
    #[arg(long = "rho-real")]
    pub rho_real: Option<f64>,
    /// Correlation the decoder tables assume (default: rho-real).
    #[arg(long = "rho-dec", conflicts_with = "blind")]
    pub rho_dec: Option<f64>,
    /// Decode without side information.
    #[arg(long)]
    pub blind: bool,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Bit error rates to sweep, replacing the codec's channels.
    #[arg(long, value_delimiter = ',')]
    pub bsc: Option<Vec<f64>>,
    /// SI quantizer sizes to sweep.
    #[arg(long = "n-si", value_delimiter = ',')]
    pub n_si: Option<Vec<usize>>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1,
    Table3,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    /// Reference operating points instead of explicit lists.
    #[arg(long, conflicts_with_all = ["rho", "r1", "r2", "mu", "mu1", "mu2"])]
    pub preset: Option<Preset>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub r1: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub r2: Vec<f64>,
    /// Loss probability of both descriptions.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["mu1", "mu2"])]
    pub mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub mu1: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub mu2: Vec<f64>,
    /// Natural-base exponent in the excess-rate term.
    #[arg(long = "natural-base")]
    pub natural_base: bool,
    /// Weight single-description distortions as mu1*D1 + mu2*D2.
    #[arg(long = "literal-weights")]
    pub literal_weights: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Estimated,
    Soft,
}

impl From<ModeArg> for SymMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Estimated => SymMode::Estimated,
            ModeArg::Soft => SymMode::Soft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Distance,
    Mi,
    MinDistortion,
}

impl From<MethodArg> for SiMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Distance => SiMethod::Distance,
            MethodArg::Mi => SiMethod::MutualInfo,
            MethodArg::MinDistortion => SiMethod::MinDistortion,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Number of sensors placed uniformly in the unit square.
    #[arg(long, default_value_t = 10, conflicts_with = "scenario_file")]
    pub nodes: usize,
    /// JSON file with `positions` (and optionally `alpha`).
    #[arg(long = "scenario-file")]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub settings: DesignSettings,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Design correlation: a number or `median-nn`.
    #[arg(
        long = "rho-enc",
        default_value = "median-nn",
        conflicts_with = "codec"
    )]
    pub rho_enc: String,
    /// Use an existing codec (its channels) instead of designing one.
    #[arg(long)]
    pub codec: Option<PathBuf>,
    /// Write the codec used by the run.
    #[arg(long = "save-codec")]
    pub save_codec: Option<PathBuf>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "estimated,soft"
    )]
    pub modes: Vec<ModeArg>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "distance,mi,min-distortion"
    )]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long = "max-iters", default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Monte-Carlo trials per selection table entry on AWGN channels.
    #[arg(long = "mc-trials", default_value_t = 4096)]
    pub mc_trials: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// CSV written by `evaluate` to compare with the BSC reference table.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Tolerance for the bound columns, dB.
    #[arg(long = "bound-tol", default_value_t = 0.05)]
    pub bound_tol: f64,
    /// Tolerance for simulated distortions, dB.
    #[arg(long = "sim-tol", default_value_t = 1.0)]
    pub sim_tol: f64,
}

/// Parses `args` (program name first), runs the command and maps errors to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_INVALID));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::IncompatibleVersion { .. } => EXIT_VERSION,
        _ => EXIT_INVALID,
    }
}

pub fn execute(cli: Cli) -> crate::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "--threads must be at least 1".into(),
            ));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Design(a) => commands::design(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Bound(a) => commands::bound(&a),
        Command::Scenario(a) => commands::scenario(&a),
        Command::Report(a) => commands::report(&a),
    })
}
