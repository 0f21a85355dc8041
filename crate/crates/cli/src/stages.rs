//! In-memory stage operations shared by the single-stage commands and the
//! pipeline, each returning its product and a key-value report.

use std::fmt::Write as _;

use rowcrop::prescription::{assign_rates, build_grid, prescription_stats, PrescriptionMap};
use rowcrop::raster::{compute_exgi, threshold_mask};
use rowcrop::rowdetect::{detect_rows, RowLine};
use rowcrop::sprayersim::{application_accuracy, plan_passes, simulate, AsAppliedMap};
use rowcrop::weedmap::{buffer_rows, connected_components, extract_weeds, mask_area_m2, WeedRegion};
use rowcrop::{BinaryMask, Raster, ScalarField};

use crate::config::RunConfig;
use crate::error::CliResult;

pub struct Segmented {
    pub exgi: ScalarField,
    pub mask: BinaryMask,
    pub report: String,
}

pub fn segment(cfg: &RunConfig, raster: &Raster) -> CliResult<Segmented> {
    let exgi = compute_exgi(raster)?;
    let mask = threshold_mask(&exgi, cfg.threshold);
    let total = (mask.width() * mask.height()) as f64;
    let veg = mask.count_ones();
    let report = format!(
        "threshold={}\nwidth_px={}\nheight_px={}\nvegetation_pixels={veg}\nvegetation_frac={:.6}\n",
        cfg.threshold,
        mask.width(),
        mask.height(),
        veg as f64 / total
    );
    Ok(Segmented { exgi, mask, report })
}

pub fn detect(cfg: &RunConfig, mask: &BinaryMask) -> CliResult<(Vec<RowLine>, String)> {
    let gsd = mask.geo().gsd_y();
    let dc = cfg.detect_config(gsd);
    let lines = detect_rows(mask, &dc)?;
    let report = format!(
        "gsd_m={gsd}\nsmooth_window_px={}\nmin_distance_px={}\nmin_prominence={}\nmerge={}\nlines={}\n",
        dc.peaks.smooth_window,
        dc.peaks.min_distance,
        dc.peaks.min_prominence,
        dc.merge,
        lines.len()
    );
    Ok((lines, report))
}

pub struct WeedMap {
    pub crop_zone: BinaryMask,
    pub weeds: BinaryMask,
    pub regions: Vec<WeedRegion>,
    pub report: String,
}

pub fn weed_map(cfg: &RunConfig, vegetation: &BinaryMask, lines: &[RowLine]) -> CliResult<WeedMap> {
    let geo = vegetation.geo();
    let crop_zone = buffer_rows(lines, &cfg.buffer, &geo, vegetation.width(), vegetation.height())?;
    let weeds = extract_weeds(vegetation, &crop_zone)?;
    let regions = connected_components(&weeds);
    let report = format!(
        "buffer_half_width_m={}\nvegetation_pixels={}\ncrop_zone_pixels={}\nweed_pixels={}\nweed_area_m2={:.6}\nweed_regions={}\n",
        cfg.buffer.half_width_m,
        vegetation.count_ones(),
        crop_zone.count_ones(),
        weeds.count_ones(),
        mask_area_m2(&weeds, &geo),
        regions.len()
    );
    Ok(WeedMap {
        crop_zone,
        weeds,
        regions,
        report,
    })
}

pub fn prescribe(cfg: &RunConfig, weeds: &BinaryMask) -> CliResult<(PrescriptionMap, String)> {
    let grid = build_grid(weeds.extent(), &cfg.grid, cfg.spray_rate_l_per_ha)?;
    let map = assign_rates(&grid, weeds)?;
    let stats = prescription_stats(&map)?;
    let mut report = format!(
        "spray_rate_l_per_ha={}\ncols={}\nrows={}\n",
        cfg.spray_rate_l_per_ha,
        map.ncols(),
        map.nrows()
    );
    report.push_str(&stats.to_report());
    Ok((map, report))
}

pub fn spray(cfg: &RunConfig, map: &PrescriptionMap) -> CliResult<(AsAppliedMap, String)> {
    let applied = simulate(map, &cfg.sprayer)?;
    let passes = plan_passes(&map.extent, &cfg.sprayer)?;
    let accuracy = application_accuracy(&applied, map)?;
    let mut report = String::new();
    let _ = write!(
        report,
        "passes={}\nnozzles={}\ntick_distance_m={}\nrectangles={}\n",
        passes.len(),
        cfg.sprayer.nozzle_count(),
        cfg.sprayer.tick_distance_m(),
        applied.rects.len()
    );
    report.push_str(&accuracy.to_report());
    Ok((applied, report))
}

/// Prefixes every `key=value` line with `stage.`.
pub fn namespaced(stage: &str, report: &str) -> String {
    report.lines().map(|l| format!("{stage}.{l}\n")).collect()
}
