use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "exhaustkit", version, about = "Gas-exhaust LiDAR augmentation and robustness toolkit")]
pub struct Cli {
    /// Key-value run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-frame stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Label files use KITTI camera axes instead of the sensor frame.
    #[arg(long, global = true)]
    pub kitti_camera_frame: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate gas clouds from the labeled sources of a pool.
    Generate(GenerateArgs),
    /// Paste pool clouds behind and above vehicles.
    Augment(AugmentArgs),
    /// Resample every cloud to a sensor scan pattern.
    Resample(ResampleArgs),
    /// Add uniform box noise around every labeled object.
    InjectNoise(InjectNoiseArgs),
    /// R40 average precision of predictions against labels.
    Evaluate(EvaluateArgs),
    /// Pairwise oriented 3D IoU of two box files.
    Iou(IouArgs),
    /// Noise-robustness loss of predictions against gas boxes.
    Loss(LossArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Pool directory holding `sources/*.bin`.
    #[arg(long)]
    pub pool: PathBuf,
    /// Destination pool directory (defaults to `--pool`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of clouds to generate.
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Emit Gaussian random-noise clouds instead of surface samples.
    #[arg(long)]
    pub random_noise: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Dataset root with `velodyne/` and `label/`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epoch: u32,
    #[arg(long)]
    pub epochs: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = exhaustkit::augment::DEFAULT_P_GAS)]
    pub p_gas: f64,
    #[arg(long, default_value_t = exhaustkit::augment::DEFAULT_P_TOP)]
    pub p_top: f64,
    #[arg(long, default_value_t = exhaustkit::augment::DEFAULT_STANDOFF)]
    pub standoff: f64,
    #[arg(long, default_value_t = exhaustkit::augment::DEFAULT_JITTER)]
    pub jitter: f64,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sensor file or preset name (`velodyne64`, `lidar40`).
    #[arg(long)]
    pub sensor: String,
}

#[derive(Debug, Args)]
pub struct InjectNoiseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Upper bound of the per-box point count.
    #[arg(long)]
    pub kprime: u32,
    #[arg(long)]
    pub seed: u64,
    /// Horizontal growth of each box face (m).
    #[arg(long, default_value_t = exhaustkit::eval::DEFAULT_NOISE_DILATION)]
    pub dilation: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset root with `label/` (and `pred/` unless `--pred` is given).
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of prediction files.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, default_value_t = exhaustkit::eval::DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    /// Ignore objects farther than this horizontal range (m).
    #[arg(long, default_value_t = f64::INFINITY)]
    pub range_gate: f64,
    /// Write the table here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IouArgs {
    /// Row boxes (label format, score optional).
    #[arg(long)]
    pub a: PathBuf,
    /// Column boxes.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Predicted boxes (label format, score optional).
    #[arg(long)]
    pub pred: PathBuf,
    /// Gas-exhaust boxes, e.g. a `gas_label/` sidecar.
    #[arg(long)]
    pub gas: PathBuf,
    #[arg(long, default_value_t = exhaustkit::loss::DEFAULT_BETA)]
    pub beta: f64,
    /// Detection loss computed by the training framework.
    #[arg(long, default_value_t = 0.0)]
    pub l_train: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
