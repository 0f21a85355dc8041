//! Command-line surface. Parameter flags override the config file.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rowcrop::synthfield::Palette;
use rowcrop::Axis;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rowcrop", version, about = "Weed maps and spray prescriptions from row-crop orthomosaics")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for tile and pass parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Excess-green segmentation of an RGB raster into a vegetation mask.
    Segment(SegmentCmd),
    /// Crop-row lines from a vegetation mask.
    DetectRows(DetectRowsCmd),
    /// Weed mask: vegetation outside the buffered crop rows.
    WeedMap(WeedMapCmd),
    /// Spray/no-spray prescription grid from a weed mask.
    Prescribe(PrescribeCmd),
    /// Replay a prescription with a section-control sprayer.
    SimulateSpray(SimulateSprayCmd),
    /// Score detected rows against ground truth or raw counts.
    EvaluateRows(EvaluateRowsCmd),
    /// Plot statistics or prescription/application summaries.
    Stats(StatsCmd),
    /// Generate a synthetic field with ground truth.
    Synth(SynthCmd),
    /// segment, detect-rows, weed-map, prescribe and optionally simulate-spray.
    Pipeline(PipelineCmd),
    /// Render rows, weeds and no-spray cells over a raster.
    Overlay(OverlayCmd),
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputOpts {
    /// Key-value report (printed to stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Run manifest path (defaults next to the main output).
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    X,
    Y,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PaletteArg {
    Standard,
    Hard,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SegmentParams {
    /// ExGI threshold; pixels at or above it are vegetation.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DetectParams {
    #[arg(long)]
    pub row_spacing_m: Option<f64>,
    #[arg(long)]
    pub tile_width_px: Option<usize>,
    #[arg(long)]
    pub tile_height_px: Option<usize>,
    #[arg(long)]
    pub tile_offset_x_px: Option<usize>,
    #[arg(long)]
    pub tile_offset_y_px: Option<usize>,
    #[arg(long)]
    pub smooth_window_px: Option<usize>,
    #[arg(long)]
    pub min_distance_px: Option<usize>,
    #[arg(long)]
    pub min_prominence: Option<f64>,
    /// Merge near-duplicate lines within a tile column.
    #[arg(long, conflicts_with = "no_merge")]
    pub merge: bool,
    #[arg(long)]
    pub no_merge: bool,
    #[arg(long)]
    pub merge_separation_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WeedParams {
    #[arg(long)]
    pub buffer_half_width_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridParams {
    #[arg(long)]
    pub cell_across_m: Option<f64>,
    #[arg(long)]
    pub cell_along_m: Option<f64>,
    #[arg(long, value_enum)]
    pub travel_axis: Option<AxisArg>,
    #[arg(long)]
    pub spray_rate_l_per_ha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SprayerParams {
    #[arg(long)]
    pub boom_width_m: Option<f64>,
    #[arg(long)]
    pub nozzle_spacing_m: Option<f64>,
    #[arg(long)]
    pub speed_m_s: Option<f64>,
    #[arg(long)]
    pub control_rate_hz: Option<f64>,
    #[arg(long)]
    pub valve_latency_s: Option<f64>,
    #[arg(long, value_enum)]
    pub heading: Option<AxisArg>,
    #[arg(long)]
    pub footprint_factor: Option<f64>,
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SegmentParams {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.threshold, self.threshold);
    }
}

impl DetectParams {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.detect;
        set(&mut d.row_spacing_m, self.row_spacing_m);
        set(&mut d.tile.tile_width, self.tile_width_px);
        set(&mut d.tile.tile_height, self.tile_height_px);
        set(&mut d.tile.offset_x, self.tile_offset_x_px);
        set(&mut d.tile.offset_y, self.tile_offset_y_px);
        if self.smooth_window_px.is_some() {
            d.smooth_window_px = self.smooth_window_px;
        }
        if self.min_distance_px.is_some() {
            d.min_distance_px = self.min_distance_px;
        }
        set(&mut d.min_prominence, self.min_prominence);
        if self.merge {
            d.merge = true;
        }
        if self.no_merge {
            d.merge = false;
        }
        if self.merge_separation_m.is_some() {
            d.merge_separation_m = self.merge_separation_m;
        }
    }
}

impl WeedParams {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.buffer.half_width_m, self.buffer_half_width_m);
    }
}

impl GridParams {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.grid.cell_across_m, self.cell_across_m);
        set(&mut cfg.grid.cell_along_m, self.cell_along_m);
        set(&mut cfg.grid.travel_axis, self.travel_axis.map(Axis::from));
        set(&mut cfg.spray_rate_l_per_ha, self.spray_rate_l_per_ha);
    }
}

impl SprayerParams {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.sprayer;
        set(&mut s.boom_width_m, self.boom_width_m);
        set(&mut s.nozzle_spacing_m, self.nozzle_spacing_m);
        set(&mut s.speed_m_s, self.speed_m_s);
        set(&mut s.control_rate_hz, self.control_rate_hz);
        set(&mut s.valve_latency_s, self.valve_latency_s);
        set(&mut s.heading, self.heading.map(Axis::from));
        set(&mut s.footprint_factor, self.footprint_factor);
    }
}

#[derive(Debug, Args)]
pub struct SegmentCmd {
    /// RGB PNG with a .pgw world file.
    #[arg(long)]
    pub input: PathBuf,
    /// Vegetation mask PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the ExGI field as a 16-bit PNG.
    #[arg(long)]
    pub exgi: Option<PathBuf>,
    #[command(flatten)]
    pub params: SegmentParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct DetectRowsCmd {
    #[arg(long)]
    pub mask: PathBuf,
    /// Row-line CSV.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: DetectParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct WeedMapCmd {
    /// Vegetation mask PNG.
    #[arg(long)]
    pub mask: PathBuf,
    /// Row-line CSV.
    #[arg(long)]
    pub rows: PathBuf,
    /// Weed mask PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// Weed region table (8-connected components).
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Buffered crop-zone mask PNG.
    #[arg(long)]
    pub crop_zone: Option<PathBuf>,
    #[command(flatten)]
    pub params: WeedParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct PrescribeCmd {
    /// Weed mask PNG.
    #[arg(long)]
    pub weeds: PathBuf,
    /// Prescription GeoJSON.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: GridParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct SimulateSprayCmd {
    #[arg(long)]
    pub prescription: PathBuf,
    /// As-applied GeoJSON.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: SprayerParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["detected", "counts"])))]
pub struct EvaluateRowsCmd {
    /// Detected row-line CSV.
    #[arg(long, requires = "truth")]
    pub detected: Option<PathBuf>,
    /// Ground-truth row-line CSV.
    #[arg(long, requires = "detected")]
    pub truth: Option<PathBuf>,
    /// Mask whose tiling the truth lines are split by before matching.
    #[arg(long, requires = "detected")]
    pub mask: Option<PathBuf>,
    /// Key-value file with tp, fp, fn and optional tn.
    #[arg(long, conflicts_with_all = ["detected", "truth", "mask"])]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub match_tolerance_m: Option<f64>,
    #[command(flatten)]
    pub tiles: DetectParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["observations", "prescription"])))]
pub struct StatsCmd {
    /// Plot observations CSV (plot_id,treatment,weed_area_m2).
    #[arg(long)]
    pub observations: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, conflicts_with = "observations")]
    pub prescription: Option<PathBuf>,
    /// As-applied map scored against the prescription.
    #[arg(long, requires = "prescription")]
    pub as_applied: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width_m: Option<f64>,
    #[arg(long)]
    pub height_m: Option<f64>,
    #[arg(long)]
    pub gsd_m: Option<f64>,
    #[arg(long)]
    pub weed_density_per_m2: Option<f64>,
    #[arg(long)]
    pub plant_dropout_prob: Option<f64>,
    #[arg(long)]
    pub row_wobble_amplitude_px: Option<f64>,
    #[arg(long, value_enum)]
    pub palette: Option<PaletteArg>,
    #[command(flatten)]
    pub out: OutputOpts,
}

impl SynthCmd {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.synth;
        set(&mut s.seed, self.seed);
        set(&mut s.extent_m[0], self.width_m);
        set(&mut s.extent_m[1], self.height_m);
        set(&mut s.gsd_m, self.gsd_m);
        set(&mut s.weed_density_per_m2, self.weed_density_per_m2);
        set(&mut s.plant_dropout_prob, self.plant_dropout_prob);
        set(&mut s.row_wobble_amplitude_px, self.row_wobble_amplitude_px);
        if let Some(p) = self.palette {
            s.palette = match p {
                PaletteArg::Standard => Palette::Standard,
                PaletteArg::Hard => Palette::Hard,
            };
        }
    }
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    /// RGB PNG with a .pgw world file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Also run simulate-spray on the prescription.
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub segment: SegmentParams,
    #[command(flatten)]
    pub detect: DetectParams,
    #[command(flatten)]
    pub weeds: WeedParams,
    #[command(flatten)]
    pub grid: GridParams,
    #[command(flatten)]
    pub sprayer: SprayerParams,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Debug, Args)]
pub struct OverlayCmd {
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long)]
    pub weeds: Option<PathBuf>,
    #[arg(long)]
    pub prescription: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputOpts,
}
