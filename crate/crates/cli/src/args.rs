use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "spinepatch",
    version,
    about = "Patch datasets from annotated spine radiographs",
    long_about = "Patch datasets from annotated spine radiographs.\n\n\
                  Results are printed as JSON on stdout; logs go to stderr. \
                  SPINEPATCH_LOG overrides --log-level."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Dataset manifest. Defaults to OUT_DIR/manifest.json.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory. Defaults to the manifest's directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-scan and per-patch work.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=256))]
    pub jobs: u64,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    pub log_level: LogLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn as_filter(&self) -> &'static str {
        match self {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
            LogLevel::Trace => "trace",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic annotated corpus into OUT_DIR.
    Synth(SynthArgs),
    /// Build a manifest from a point-list CSV.
    Import(ImportArgs),
    /// Cut every scan into a fixed grid of tiles.
    Tile(TileArgs),
    /// Cut one expanded-contour patch per vertebra.
    Segpatch(SegpatchArgs),
    /// Assign scans to train and test, stratified by region.
    Split(SplitArgs),
    /// Train the patch classifier for one method.
    Train(TrainArgs),
    /// Evaluate a trained model on a split.
    Eval(EvalArgs),
    /// Occlusion saliency for one patch.
    Saliency(SaliencyArgs),
    /// Draw contours, osteophytes and patch boxes onto the scans.
    Overlay(OverlayArgs),
    /// Corpus and patch counts.
    Stats,
    /// Which osteophytes fall outside every SegPatch.
    Coverage,
    /// Side-by-side report of the two trained methods.
    Compare,
    /// synth, tile, segpatch, split, train both methods, compare.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    pub n_scans: usize,
    /// Fraction of cervical scans.
    #[arg(long)]
    pub region_mix: Option<f64>,
    /// Largest spine tilt, degrees.
    #[arg(long)]
    pub curvature: Option<f64>,
    #[arg(long)]
    pub osteophyte_rate: Option<f64>,
    #[arg(long)]
    pub bump_radius: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub artifact_text_rate: Option<f64>,
    #[arg(long)]
    pub min_vertebrae: Option<usize>,
    #[arg(long)]
    pub max_vertebrae: Option<usize>,
    /// Draw every corner independently at the base osteophyte rate.
    #[arg(long)]
    pub independent: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ImportArgs {
    /// Point-list CSV with columns scan_id,kind,index,x,y,region.
    #[arg(long)]
    pub csv: PathBuf,
    /// Directory holding the scan images.
    #[arg(long)]
    pub images_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TileArgs {
    #[arg(long, default_value_t = 224, value_parser = clap::value_parser!(u64).range(1..))]
    pub tile_w: u64,
    #[arg(long, default_value_t = 224, value_parser = clap::value_parser!(u64).range(1..))]
    pub tile_h: u64,
    /// Half side of the box drawn around each osteophyte point.
    #[arg(long, default_value_t = 18.0)]
    pub half_extent: f64,
    /// Label only; do not write crop files.
    #[arg(long)]
    pub no_crops: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContourSourceArg {
    Mask,
    SixPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelGeometryArg {
    ExpandedPolygon,
    CropBbox,
}

#[derive(Debug, Clone, Args)]
pub struct SegpatchArgs {
    /// −X displacement of left-facing edges, cervical scans.
    #[arg(long)]
    pub dx_cervical: Option<f64>,
    #[arg(long)]
    pub dx_lumbar: Option<f64>,
    /// +Y displacement of downward-facing edges, cervical scans.
    #[arg(long)]
    pub dy_cervical: Option<f64>,
    #[arg(long)]
    pub dy_lumbar: Option<f64>,
    /// Multiplies all four displacements (0 disables expansion).
    #[arg(long, default_value_t = 1.0)]
    pub expansion_scale: f64,
    #[arg(long, value_enum, default_value_t = ContourSourceArg::Mask)]
    pub contour_source: ContourSourceArg,
    #[arg(long, value_enum, default_value_t = LabelGeometryArg::ExpandedPolygon)]
    pub label_geometry: LabelGeometryArg,
    #[arg(long)]
    pub no_crops: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tiling,
    Segpatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    CrossEntropy,
    WeightedCrossEntropy,
    Focal,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Segpatch)]
    pub method: MethodArg,
    /// Defaults to 0.002 for segpatch and 0.01 for tiling.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Defaults to 0.9 for segpatch and 0.7 for tiling.
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long, default_value_t = 7)]
    pub scheduler_step: usize,
    #[arg(long, default_value_t = 0.1)]
    pub scheduler_gamma: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = LossArg::WeightedCrossEntropy)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 2.0)]
    pub focal_gamma: f64,
    /// Largest augmentation rotation, degrees.
    #[arg(long, default_value_t = 30.0)]
    pub rotation_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub equalize_prob: f64,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Segpatch)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Debug, Clone, Args)]
pub struct SaliencyArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Segpatch)]
    pub method: MethodArg,
    #[arg(long)]
    pub patch_id: String,
    /// Occluder side in model-input pixels.
    #[arg(long, default_value_t = 56)]
    pub window: usize,
    #[arg(long, default_value_t = 28)]
    pub stride: usize,
    /// Box windows whose |saliency| reaches this share of the peak.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OverlayArgs {
    /// Only this scan (default: every scan).
    #[arg(long)]
    pub scan_id: Option<String>,
    /// Also draw this method's patch boxes.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 40)]
    pub n_scans: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
}
