//! `delimiter`: dataset building, training, inference and reporting for
//! de-limiter networks.

mod cmd;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delimiter_core::net::Head;
use delimiter_core::{BitDepth, Error, NormKind};
use serde::Serialize;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// A failed command: message plus the exit code reported to the shell.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            Error::Io(_)
            | Error::Path { .. }
            | Error::Format(_)
            | Error::Corrupt(_)
            | Error::Dimension(_)
            | Error::StemSum { .. }
            | Error::Build(_)
            | Error::VersionMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::Checksum
            | Error::Json(_) => EXIT_DATA,
            Error::UndefinedMetric(_) | Error::Metric(_) | Error::Normalization(_) | Error::Training(_) | Error::Loss(_) => {
                EXIT_RUNTIME
            }
        };
        Self { code, message: e.to_string() }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "delimiter", version, about, args_override_self = true)]
#[command(after_help = "Defaults can be read from a TOML file (--config PATH or $DELIMITER_CONFIG); \
its [<subcommand>] table supplies flag values and explicit flags take precedence.")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a procedural four-stem pool.
    SynthPool(SynthPoolArgs),
    /// Mix, limit and store (limited, original) training pairs.
    BuildData(BuildDataArgs),
    /// Train a de-limiter network on a built dataset.
    Train(TrainArgs),
    /// De-limit audio with a trained checkpoint.
    Infer(InferArgs),
    /// Compare estimates with references (SI-SDR, multi-resolution spectral MSE, cost).
    Evaluate(EvaluateArgs),
    /// Dynamic and spectral statistics of every file in a directory.
    Analyze(AnalyzeArgs),
    /// Apply a mixture's de-limiting gains to its stems.
    StemsTransfer(StemsTransferArgs),
    /// Run the lookahead limiter.
    Limit(LimitArgs),
    /// Undo a limiter with its exported gain envelope.
    OracleInvert(OracleInvertArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadArg {
    Synthesis,
    Masking,
    Sgi,
}

impl From<HeadArg> for Head {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Synthesis => Head::Synthesis,
            HeadArg::Masking => Head::Masking,
            HeadArg::Sgi => Head::Sgi,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    Gln,
    Ln,
    Bn,
    Fgln,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Gln => NormKind::Gln,
            NormArg::Ln => NormKind::Ln,
            NormArg::Bn => NormKind::Bn,
            NormArg::Fgln => NormKind::Fgln,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum DepthArg {
    #[value(name = "16")]
    #[serde(rename = "16")]
    Pcm16,
    #[value(name = "24")]
    #[serde(rename = "24")]
    Pcm24,
    #[value(name = "float32")]
    #[serde(rename = "float32")]
    Float32,
}

impl From<DepthArg> for BitDepth {
    fn from(d: DepthArg) -> Self {
        match d {
            DepthArg::Pcm16 => BitDepth::Pcm16,
            DepthArg::Pcm24 => BitDepth::Pcm24,
            DepthArg::Float32 => BitDepth::Float32,
        }
    }
}

/// Blocks per repeat and repeats, written `X,R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Xr {
    pub blocks: usize,
    pub repeats: usize,
}

fn parse_xr(s: &str) -> Result<Xr, String> {
    let (x, r) = s.split_once(',').ok_or_else(|| format!("expected X,R, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let xr = Xr { blocks: parse(x)?, repeats: parse(r)? };
    if xr.blocks == 0 || xr.repeats == 0 {
        return Err("X and R must be positive".into());
    }
    Ok(xr)
}

#[derive(Debug, Args, Serialize)]
pub struct SynthPoolArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub tracks: u64,
    #[arg(long, default_value_t = 20.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=2))]
    pub channels: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildDataArgs {
    /// Directory of track folders holding vocals/bass/drums/other WAVs.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub segment_seconds: f64,
    /// Stem gains are drawn uniformly within plus or minus this many dB.
    #[arg(long, default_value_t = 6.0)]
    pub max_gain_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub swap_probability: f64,
    /// Use all four stems of one track at unit gain.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directories written by build-data; repeat or comma-separate to
    /// train on their union.
    #[arg(long, required = true, value_delimiter = ',')]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeadArg::Sgi)]
    pub head: HeadArg,
    #[arg(long, value_enum, default_value_t = NormArg::Gln)]
    pub norm: NormArg,
    /// Blocks per repeat and repeats.
    #[arg(long, value_parser = parse_xr, default_value = "2,1")]
    pub xr: Xr,
    #[arg(long, default_value_t = 128)]
    pub basis: usize,
    #[arg(long, default_value_t = 32)]
    pub kernel_len: usize,
    #[arg(long, default_value_t = 32)]
    pub bottleneck: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub block_kernel: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub val_split: f64,
    /// Global gradient-norm clip; 0 disables it.
    #[arg(long, default_value_t = 5.0)]
    pub grad_clip: f64,
    /// Weight-initialization seed (defaults to --seed).
    #[arg(long)]
    pub init_seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A WAV file or a directory of WAV files.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file, or directory when the input is a directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = -14.0, allow_negative_numbers = true)]
    pub target_lufs: f64,
    /// Share of the loudness-normalized input blended into the output.
    #[arg(long)]
    pub parallel_mix: Option<f64>,
    /// Activation memory above which long inputs run in overlapping chunks.
    #[arg(long, default_value_t = 1024)]
    pub memory_budget_mb: u64,
    #[arg(long, value_enum, default_value_t = DepthArg::Float32)]
    pub bit_depth: DepthArg,
    /// JSON-lines report of per-file loudness.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub estimates: PathBuf,
    #[arg(long)]
    pub references: PathBuf,
    /// Unprocessed inputs; adds a baseline row.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Checkpoint whose parameter and MAC counts fill the cost columns.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "estimate")]
    pub label: String,
    /// Loudness both signals are normalized to before the spectral distance.
    #[arg(long, default_value_t = -14.0, allow_negative_numbers = true)]
    pub lufs: f64,
    /// Compare the spectra at their stored levels.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Loudness-normalize every file to this level first.
    #[arg(long, allow_negative_numbers = true)]
    pub lufs: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StemsTransferArgs {
    /// The limited mixture the stems sum to.
    #[arg(long)]
    pub limited_mix: PathBuf,
    /// De-limited version of that mixture.
    #[arg(long)]
    pub delimited_mix: PathBuf,
    /// Directory of stem WAVs summing to the limited mixture.
    #[arg(long)]
    pub stems: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Unlimited stems with the same names; enables the SI-SDR columns.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long, default_value_t = delimiter_core::dynamics::TRANSFER_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub input_gain_db: f64,
    #[arg(long, default_value_t = 0.98)]
    pub ceiling: f64,
    #[arg(long, default_value_t = 2.0)]
    pub attack_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    pub release_ms: f64,
    #[arg(long, default_value_t = 3.0)]
    pub lookahead_ms: f64,
    /// Gain envelope output: `.wav` (float32) or raw little-endian f32.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Output encoding; defaults to the input's.
    #[arg(long, value_enum)]
    pub bit_depth: Option<DepthArg>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleInvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub envelope: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Gains below this are clamped before dividing.
    #[arg(long, default_value_t = 1e-6)]
    pub gain_floor: f64,
    #[arg(long, value_enum, default_value_t = DepthArg::Float32)]
    pub bit_depth: DepthArg,
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::SynthPool(a) => cmd::data::synth_pool(&a),
        Command::BuildData(a) => cmd::data::build_data(&a),
        Command::Train(a) => cmd::train::train(&a),
        Command::Infer(a) => cmd::infer::infer(&a),
        Command::Evaluate(a) => cmd::report::evaluate(&a),
        Command::Analyze(a) => cmd::report::analyze(&a),
        Command::StemsTransfer(a) => cmd::report::stems_transfer(&a),
        Command::Limit(a) => cmd::dsp::limit(&a),
        Command::OracleInvert(a) => cmd::dsp::oracle_invert(&a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
