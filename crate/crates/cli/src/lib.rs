//! `rainforge` command-line entry points and the review HTTP service.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod server;

/// Environment variable consulted when `--config` is absent.
pub const CONFIG_ENV: &str = "RAINFORGE_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "rainforge",
    version,
    about = "Paired rain/clean frame curation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align one clean frame onto its rainy counterpart.
    Align(AlignArgs),
    /// Evaluate the collection criteria for one pair.
    Assess(AssessArgs),
    /// Curate every pair found under the configured directories.
    Pipeline(PipelineArgs),
    /// Render rain onto a clean frame, or write a synthetic test corpus.
    Synth(SynthArgs),
    /// PSNR, SSIM and MS-SSIM between two images.
    Metrics(MetricsArgs),
    /// Evaluate the rain-robust objective and check its gradients.
    Losscheck(LosscheckArgs),
    /// Assign accepted pairs to train/val/test by scene.
    Split(SplitArgs),
    /// Write the split dataset as a directory tree.
    Export(ExportArgs),
    /// Serve the review API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Curation config (TOML). Falls back to $RAINFORGE_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub rainy: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    /// auto, none, homography, elastic or homography+elastic.
    #[arg(long, default_value = "auto")]
    pub mode: String,
    /// Directory for homography.json, field.dfield, aligned.png and report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub rainy: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    /// Capture-time gap; the time criterion is skipped when absent.
    #[arg(long)]
    pub time_delta_minutes: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clean input frame. Not needed with --corpus.
    #[arg(long, required_unless_present = "corpus")]
    pub clean: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the 10-pair harness corpus (rainy/, clean/, truth.json) instead.
    #[arg(long)]
    pub corpus: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of streak layers.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Streaks per layer.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Veiling strength in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub veil: f64,
    /// Camera shift applied to the clean frame before compositing, px.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub shift_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub shift_y: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Restrict to `x,y,w,h`.
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Feature length.
    #[arg(long, default_value_t = 1024)]
    pub dim: usize,
    /// Pairs per mini-batch.
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.25)]
    pub temperature: f64,
    /// Leave the positive out of the denominator.
    #[arg(long)]
    pub paper_literal: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Train, val and test fractions.
    #[arg(long, default_value = "0.829,0.105,0.066")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the assignment here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Assignment written by `split --out`.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Root for relative artifact paths; defaults to the manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Root for relative artifact paths; defaults to the manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit 2.
    Usage(String),
    /// The operation itself failed: exit 1.
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(e) => write!(f, "error: {e:#}"),
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Failed(e.into())
            }
        }
    )*};
}

failed_from!(
    anyhow::Error,
    rainforge_core::Error,
    std::io::Error,
    serde_json::Error
);

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. JSON results go to `out`, messages to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
