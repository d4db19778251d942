use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsr_btd::Method;

#[derive(Debug, Parser)]
#[command(
    name = "hsr-btd",
    version,
    about = "Hyperspectral super-resolution by coupled block-term decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrade a reference image into an HSI/MSI pair.
    Simulate(SimulateArgs),
    /// Fuse an HSI/MSI pair into a super-resolution estimate.
    Fuse(FuseArgs),
    /// Compare an estimate with a reference image.
    Evaluate(EvaluateArgs),
    /// Run a Monte Carlo comparison described by a JSON config.
    Bench(BenchArgs),
    /// Write a random nonnegative block-term image.
    Generate(GenerateArgs),
}

/// Spatial and spectral degradation flags.
#[derive(Debug, Clone, Args)]
pub struct DegradationArgs {
    /// Spatial downsampling ratio d.
    #[arg(long, default_value_t = 5)]
    pub ratio: usize,
    /// Odd Gaussian kernel size.
    #[arg(long, default_value_t = 9)]
    pub kernel_size: usize,
    /// Gaussian standard deviation in pixels [default: ratio / 2].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Index of the first retained sample, below the ratio.
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    /// Number of MSI bands for the uniform spectral response.
    #[arg(long, default_value_t = 4)]
    pub msi_bands: usize,
    /// Spectral response CSV (one row per MSI band); overrides --msi-bands.
    #[arg(long)]
    pub srf: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub sri: PathBuf,
    #[arg(long)]
    pub out_hsi: PathBuf,
    #[arg(long)]
    pub out_msi: PathBuf,
    /// Target SNR in dB for both images; `inf` disables noise.
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub degradation: DegradationArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    CnnBtd,
    CnnCpd,
    Stereo,
    TwoStage,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::CnnBtd => Method::CnnBtd,
            MethodArg::CnnCpd => Method::CnnCpd,
            MethodArg::Stereo => Method::Stereo,
            MethodArg::TwoStage => Method::TwoStage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    RandomUniform,
    SvdWarm,
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub hsi: PathBuf,
    #[arg(long)]
    pub msi: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::CnnBtd)]
    pub method: MethodArg,
    /// Number of blocks R (components F for the CPD methods)
    /// [default: 10 for block-term methods, 100 for CPD methods].
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Block rank L; ignored by the CPD methods [default: 20].
    #[arg(long)]
    pub block_rank: Option<usize>,
    /// BCD sweeps [default: 100 for stereo, 20 otherwise].
    #[arg(long)]
    pub outer_iters: Option<usize>,
    /// ADMM iterations per block update.
    #[arg(long, default_value_t = 5)]
    pub inner_iters: usize,
    /// ADMM penalty: `auto`, `balanced` or a positive number.
    #[arg(long, default_value = "auto")]
    pub rho: String,
    /// Relative objective change per sweep that stops early; 0 disables.
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::RandomUniform)]
    pub init: InitArg,
    /// Start from factors in JSON (as written by `generate`); overrides --init.
    #[arg(long)]
    pub init_factors: Option<PathBuf>,
    /// Also write the estimated factors as JSON.
    #[arg(long)]
    pub factors_out: Option<PathBuf>,
    #[command(flatten)]
    pub degradation: DegradationArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    /// Spatial ratio d used by ERGAS.
    #[arg(long)]
    pub ratio: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// I,J,K of the image.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub block_rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generating factors as JSON.
    #[arg(long)]
    pub factors_out: Option<PathBuf>,
}
