use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Rotation, evaluation and loss-weighting tools for equirectangular panoramas.
///
/// Any subcommand flag can also come from `--config FILE` (TOML): keys under a
/// `[<subcommand>]` table use the flag names without dashes, e.g.
/// `[augment]` / `max-yaw = 180`. Flags given on the command line win.
#[derive(Debug, Parser)]
#[command(name = "panosga", version, args_override_self = true)]
pub struct Cli {
    /// TOML file with default flag values per subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rotate one image or label PNG on the sphere.
    Rotate(RotateArgs),
    /// Write randomly rotated copies of a dataset.
    Augment(AugmentArgs),
    /// Score precomputed predictions against a dataset.
    Evaluate(EvaluateArgs),
    /// Evaluate a predictor over a grid of rotations.
    SgaValidate(SgaValidateArgs),
    /// Mean, population variance and range of a list of values or a report.
    Aggregate(AggregateArgs),
    /// Write the latitude loss-weight map.
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Image,
    Label,
}

#[derive(Debug, Args)]
pub struct RotateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Degrees about the polar axis.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub yaw: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pitch: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub roll: f64,
    #[arg(long, value_enum, default_value_t = Mode::Image)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Augmented copies per manifest entry.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 360.0)]
    pub max_yaw: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_pitch: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_roll: f64,
    /// Probability that a copy is rotated at all.
    #[arg(long, default_value_t = 0.5)]
    pub prob: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory holding `<sample_id>.png` predictions.
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Class count; defaults to the manifest's `num_classes`.
    #[arg(long)]
    pub classes: Option<usize>,
    /// JSON metrics record output.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SgaValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `dir:PATH` (predictions at PATH/<situation>/<sample_id>.png) or
    /// `cmd:TEMPLATE` (shell command with {input} and {output} tokens).
    #[arg(long)]
    pub predictor: String,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,90,180,270",
        allow_negative_numbers = true
    )]
    pub grid_yaw: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,5",
        allow_negative_numbers = true
    )]
    pub grid_pitch: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,5",
        allow_negative_numbers = true
    )]
    pub grid_roll: Vec<f64>,
    /// JSON report output.
    #[arg(long)]
    pub report: PathBuf,
    /// Optional CSV table output.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct AggregateSource {
    /// Comma-separated values, or a file of values separated by commas or whitespace.
    #[arg(long, allow_negative_numbers = true)]
    pub values: Option<String>,
    /// JSON report from `sga-validate`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub source: AggregateSource,
    /// Decimal places printed.
    #[arg(long, default_value_t = 3)]
    pub precision: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightFormat {
    /// Whitespace-separated matrix, one line per row.
    Text,
    /// 8-bit grayscale, weight × 255.
    Png,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub height: usize,
    /// Defaults to twice the height.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
    /// Defaults to png for `.png` outputs, text otherwise.
    #[arg(long, value_enum)]
    pub format: Option<WeightFormat>,
}
