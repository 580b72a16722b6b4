use std::path::PathBuf;

use bindcap::ChannelKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bindcap", version, about = "Capacity of n-receptor ligand-binding channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the continuous-time MI rate over IID or feedback policies.
    Capacity(CapacityArgs),
    /// Evaluate the continuous-time MI rate on a grid of policies (CSV).
    Sweep(SweepArgs),
    /// Run the Monte Carlo oracle and compare with the exact discrete rate.
    Simulate(SimulateArgs),
    /// Tabulate IID capacity against n and check C(n) = n C(1).
    Scaling(ScalingArgs),
    /// Re-run the command recorded in an output's manifest block.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Independent,
    Cooperative,
    Custom,
}

impl From<KindArg> for ChannelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Independent => ChannelKind::Independent,
            KindArg::Cooperative => ChannelKind::Cooperative,
            KindArg::Custom => ChannelKind::Custom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Iid,
    Feedback,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Iid => "iid",
            Mode::Feedback => "feedback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Channel description: a spec file, flags, or both (flags win).
#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// TOML channel spec file.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Number of receptors.
    #[arg(long)]
    pub n: Option<usize>,
    /// Low-concentration binding rate per receptor (Hz).
    #[arg(long = "alpha-l", value_name = "HZ")]
    pub alpha_l: Option<f64>,
    /// High-concentration binding rate per receptor (Hz).
    #[arg(long = "alpha-h", value_name = "HZ")]
    pub alpha_h: Option<f64>,
    /// Unbinding rate per receptor (Hz).
    #[arg(long, value_name = "HZ")]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Display information in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum, default_value = "iid")]
    pub mode: Mode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Points per axis: `N` (same on every axis) or `N,M`.
    #[arg(long, default_value = "101")]
    pub grid: String,
    /// 1 for an IID sweep over p, 2 for a (p_0, p_1) heatmap. Defaults to 2
    /// when n = 2 and 1 otherwise.
    #[arg(long)]
    pub axes: Option<u8>,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Feedback policy `p_0,...,p_{n-1}`; defaults to the optimum for `--mode`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub policy: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "iid")]
    pub mode: Mode,
    /// Time step in seconds.
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "burn-in", default_value_t = 0)]
    pub burn_in: usize,
    /// Exit with status 2 unless the estimate lies within 3 standard errors
    /// of the exact rate.
    #[arg(long)]
    pub check: bool,
    /// Export the trajectory; `.bin` selects the binary layout, anything else CSV.
    #[arg(long = "trajectory-out", value_name = "FILE")]
    pub trajectory_out: Option<PathBuf>,
    /// Export the transition-count tensor as CSV.
    #[arg(long = "counts-out", value_name = "FILE")]
    pub counts_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Largest receptor count in the table (rows run from n = 1).
    #[arg(long = "n-max", default_value_t = 10)]
    pub n_max: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Output file containing a `# args=` manifest line.
    pub manifest: PathBuf,
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
}
