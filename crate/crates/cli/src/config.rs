//! Run configuration: one TOML file, units in key names.
//!
//! Lengths and rates may be given in the unit their key names
//! (`*_m`, `*_in`, `*_ft`, `*_l_per_ha`, `*_gal_per_ac`, `*_m_s`, `*_km_h`);
//! everything is converted to metric here and never again.

use std::path::Path;

use rowcrop::prescription::{GridSpec, DEFAULT_SPRAY_RATE_L_PER_HA};
use rowcrop::rowdetect::{DetectConfig, PeakParams, TileSpec, DEFAULT_ROW_SPACING_M};
use rowcrop::sprayersim::SprayerConfig;
use rowcrop::synthfield::FieldSpec;
use rowcrop::weedmap::BufferSpec;
use rowcrop::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const M_PER_IN: f64 = 0.0254;
pub const M_PER_FT: f64 = 0.3048;
pub const L_PER_HA_PER_GAL_PER_AC: f64 = 9.3540;
pub const M_S_PER_KM_H: f64 = 1.0 / 3.6;

pub const DEFAULT_THRESHOLD: f64 = 0.08;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectSettings {
    pub row_spacing_m: f64,
    pub tile: TileSpec,
    /// Derived from the row spacing and mask GSD when unset.
    pub smooth_window_px: Option<usize>,
    pub min_distance_px: Option<usize>,
    pub min_prominence: f64,
    pub merge: bool,
    pub merge_separation_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub threshold: f64,
    pub detect: DetectSettings,
    pub buffer: BufferSpec,
    pub grid: GridSpec,
    pub spray_rate_l_per_ha: f64,
    pub sprayer: SprayerConfig,
    /// Defaults to a quarter of the row spacing.
    pub match_tolerance_m: Option<f64>,
    pub alpha: f64,
    pub synth: FieldSpec,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threshold: DEFAULT_THRESHOLD,
            detect: DetectSettings {
                row_spacing_m: DEFAULT_ROW_SPACING_M,
                tile: TileSpec::default(),
                smooth_window_px: None,
                min_distance_px: None,
                min_prominence: 0.1,
                merge: false,
                merge_separation_m: None,
            },
            buffer: BufferSpec::default(),
            grid: GridSpec::default(),
            spray_rate_l_per_ha: DEFAULT_SPRAY_RATE_L_PER_HA,
            sprayer: SprayerConfig::default(),
            match_tolerance_m: None,
            alpha: DEFAULT_ALPHA,
            synth: FieldSpec::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    segment: RawSegment,
    detect: RawDetect,
    weeds: RawWeeds,
    grid: RawGrid,
    sprayer: RawSprayer,
    evaluate: RawEvaluate,
    stats: RawStats,
    synth: Option<FieldSpec>,
    run: RawRun,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSegment {
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDetect {
    row_spacing_m: Option<f64>,
    row_spacing_in: Option<f64>,
    tile_width_px: Option<usize>,
    tile_height_px: Option<usize>,
    tile_offset_x_px: Option<usize>,
    tile_offset_y_px: Option<usize>,
    smooth_window_px: Option<usize>,
    min_distance_px: Option<usize>,
    min_prominence: Option<f64>,
    merge: Option<bool>,
    merge_separation_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawWeeds {
    buffer_half_width_m: Option<f64>,
    buffer_half_width_in: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGrid {
    cell_across_m: Option<f64>,
    cell_across_ft: Option<f64>,
    cell_along_m: Option<f64>,
    cell_along_ft: Option<f64>,
    origin_m: Option<[f64; 2]>,
    travel_axis: Option<Axis>,
    spray_rate_l_per_ha: Option<f64>,
    spray_rate_gal_per_ac: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSprayer {
    boom_width_m: Option<f64>,
    boom_width_ft: Option<f64>,
    nozzle_spacing_m: Option<f64>,
    nozzle_spacing_in: Option<f64>,
    speed_m_s: Option<f64>,
    speed_km_h: Option<f64>,
    control_rate_hz: Option<f64>,
    valve_latency_s: Option<f64>,
    heading: Option<Axis>,
    footprint_factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEvaluate {
    match_tolerance_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawStats {
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    threads: Option<usize>,
}

/// One quantity that may be written in several units; at most one may be set.
fn quantity(section: &str, options: &[(&str, Option<f64>, f64)], default: f64) -> CliResult<f64> {
    let set: Vec<_> = options.iter().filter(|(_, v, _)| v.is_some()).collect();
    match set.as_slice() {
        [] => Ok(default),
        [(_, Some(v), factor)] => Ok(v * factor),
        _ => Err(CliError::config(format!(
            "[{section}] sets {} together; pick one unit",
            set.iter().map(|(k, _, _)| *k).collect::<Vec<_>>().join(" and ")
        ))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
        let d = RunConfig::default();

        let det = &raw.detect;
        let detect = DetectSettings {
            row_spacing_m: quantity(
                "detect",
                &[("row_spacing_m", det.row_spacing_m, 1.0), ("row_spacing_in", det.row_spacing_in, M_PER_IN)],
                d.detect.row_spacing_m,
            )?,
            tile: TileSpec {
                tile_width: det.tile_width_px.unwrap_or(d.detect.tile.tile_width),
                tile_height: det.tile_height_px.unwrap_or(d.detect.tile.tile_height),
                offset_x: det.tile_offset_x_px.unwrap_or(d.detect.tile.offset_x),
                offset_y: det.tile_offset_y_px.unwrap_or(d.detect.tile.offset_y),
            },
            smooth_window_px: det.smooth_window_px,
            min_distance_px: det.min_distance_px,
            min_prominence: det.min_prominence.unwrap_or(d.detect.min_prominence),
            merge: det.merge.unwrap_or(d.detect.merge),
            merge_separation_m: det.merge_separation_m,
        };

        let buffer = BufferSpec {
            half_width_m: quantity(
                "weeds",
                &[
                    ("buffer_half_width_m", raw.weeds.buffer_half_width_m, 1.0),
                    ("buffer_half_width_in", raw.weeds.buffer_half_width_in, M_PER_IN),
                ],
                d.buffer.half_width_m,
            )?,
        };

        let g = &raw.grid;
        let grid = GridSpec {
            cell_across_m: quantity(
                "grid",
                &[("cell_across_m", g.cell_across_m, 1.0), ("cell_across_ft", g.cell_across_ft, M_PER_FT)],
                d.grid.cell_across_m,
            )?,
            cell_along_m: quantity(
                "grid",
                &[("cell_along_m", g.cell_along_m, 1.0), ("cell_along_ft", g.cell_along_ft, M_PER_FT)],
                d.grid.cell_along_m,
            )?,
            origin: g.origin_m.or(d.grid.origin),
            travel_axis: g.travel_axis.unwrap_or(d.grid.travel_axis),
        };
        let spray_rate_l_per_ha = quantity(
            "grid",
            &[
                ("spray_rate_l_per_ha", g.spray_rate_l_per_ha, 1.0),
                ("spray_rate_gal_per_ac", g.spray_rate_gal_per_ac, L_PER_HA_PER_GAL_PER_AC),
            ],
            d.spray_rate_l_per_ha,
        )?;

        let s = &raw.sprayer;
        let sprayer = SprayerConfig {
            boom_width_m: quantity(
                "sprayer",
                &[("boom_width_m", s.boom_width_m, 1.0), ("boom_width_ft", s.boom_width_ft, M_PER_FT)],
                d.sprayer.boom_width_m,
            )?,
            nozzle_spacing_m: quantity(
                "sprayer",
                &[
                    ("nozzle_spacing_m", s.nozzle_spacing_m, 1.0),
                    ("nozzle_spacing_in", s.nozzle_spacing_in, M_PER_IN),
                ],
                d.sprayer.nozzle_spacing_m,
            )?,
            speed_m_s: quantity(
                "sprayer",
                &[("speed_m_s", s.speed_m_s, 1.0), ("speed_km_h", s.speed_km_h, M_S_PER_KM_H)],
                d.sprayer.speed_m_s,
            )?,
            control_rate_hz: s.control_rate_hz.unwrap_or(d.sprayer.control_rate_hz),
            valve_latency_s: s.valve_latency_s.unwrap_or(d.sprayer.valve_latency_s),
            heading: s.heading.unwrap_or(d.sprayer.heading),
            footprint_factor: s.footprint_factor.unwrap_or(d.sprayer.footprint_factor),
        };

        Ok(RunConfig {
            threshold: raw.segment.threshold.unwrap_or(d.threshold),
            detect,
            buffer,
            grid,
            spray_rate_l_per_ha,
            sprayer,
            match_tolerance_m: raw.evaluate.match_tolerance_m,
            alpha: raw.stats.alpha.unwrap_or(d.alpha),
            synth: raw.synth.unwrap_or_default(),
            threads: raw.run.threads,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    /// Checks every parameter; all failures are config errors.
    pub fn validate(&self) -> CliResult<()> {
        let cfg = |e: rowcrop::Error| CliError::config(e.to_string());
        if !self.threshold.is_finite() {
            return Err(CliError::config(format!("threshold must be finite, got {}", self.threshold)));
        }
        let det = &self.detect;
        if !(det.row_spacing_m > 0.0 && det.row_spacing_m.is_finite()) {
            return Err(CliError::config(format!("row_spacing_m must be positive, got {}", det.row_spacing_m)));
        }
        det.tile.validate().map_err(cfg)?;
        PeakParams {
            smooth_window: det.smooth_window_px.unwrap_or(1),
            min_distance: det.min_distance_px.unwrap_or(1),
            min_prominence: det.min_prominence,
        }
        .validate()
        .map_err(cfg)?;
        if let Some(sep) = det.merge_separation_m {
            if !(sep > 0.0 && sep.is_finite()) {
                return Err(CliError::config(format!("merge_separation_m must be positive, got {sep}")));
            }
        }
        self.buffer.validate().map_err(cfg)?;
        self.grid.validate().map_err(cfg)?;
        if !(self.spray_rate_l_per_ha > 0.0 && self.spray_rate_l_per_ha.is_finite()) {
            return Err(CliError::config(format!(
                "spray_rate_l_per_ha must be positive, got {}",
                self.spray_rate_l_per_ha
            )));
        }
        self.sprayer.validate().map_err(cfg)?;
        if let Some(tol) = self.match_tolerance_m {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(CliError::config(format!("match_tolerance_m must be non-negative, got {tol}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.synth.validate().map_err(cfg)?;
        if self.threads == Some(0) {
            return Err(CliError::config("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn detect_config(&self, gsd_m: f64) -> DetectConfig {
        let det = &self.detect;
        let mut out = DetectConfig::for_row_spacing(det.row_spacing_m, gsd_m);
        out.tile = det.tile;
        if let Some(w) = det.smooth_window_px {
            out.peaks.smooth_window = w;
        }
        if let Some(d) = det.min_distance_px {
            out.peaks.min_distance = d;
        }
        out.peaks.min_prominence = det.min_prominence;
        out.merge = det.merge;
        if let Some(sep) = det.merge_separation_m {
            out.merge_separation_m = sep;
        }
        out
    }

    pub fn match_tolerance_m(&self) -> f64 {
        self.match_tolerance_m.unwrap_or(0.25 * self.detect.row_spacing_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unit_conversions() {
        let cfg = RunConfig::from_toml_str(
            "[detect]\nrow_spacing_in = 30\n[weeds]\nbuffer_half_width_in = 3.5\n\
             [grid]\ncell_along_ft = 10\ncell_across_ft = 1.67\nspray_rate_gal_per_ac = 15\n\
             [sprayer]\nspeed_km_h = 10.5\nboom_width_ft = 136.6\n",
        )
        .unwrap();
        assert!((cfg.detect.row_spacing_m - 0.762).abs() < 1e-12);
        assert!((cfg.buffer.half_width_m - 0.0889).abs() < 1e-12);
        assert!((cfg.grid.cell_along_m - 3.048).abs() < 1e-12);
        assert!((cfg.grid.cell_across_m - 0.509016).abs() < 1e-12);
        assert!((cfg.spray_rate_l_per_ha - 140.31).abs() < 1e-9);
        assert!((cfg.sprayer.speed_m_s - 2.916_666_666_666_667).abs() < 1e-12);
        assert!((cfg.sprayer.boom_width_m - 41.635_68).abs() < 1e-9);
    }

    #[test]
    fn rejects_unknown_and_conflicting_keys() {
        let e = RunConfig::from_toml_str("[segment]\nthreshhold = 0.1\n").unwrap_err();
        assert_eq!(e.class, crate::error::ErrorClass::Config);
        assert!(e.message.contains("threshhold"));
        assert!(RunConfig::from_toml_str("[bogus]\nx = 1\n").is_err());
        let e = RunConfig::from_toml_str("[detect]\nrow_spacing_m = 0.76\nrow_spacing_in = 30\n").unwrap_err();
        assert!(e.message.contains("pick one unit"));
        assert!(RunConfig::from_toml_str("[synth]\nextent = [1, 1]\n").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        for text in [
            "[detect]\nsmooth_window_px = 30\n",
            "[detect]\nmin_prominence = 2\n",
            "[grid]\ncell_along_m = 0\n",
            "[sprayer]\ncontrol_rate_hz = -1\n",
            "[stats]\nalpha = 1.5\n",
            "[synth]\nplant_dropout_prob = 1.5\n",
        ] {
            let cfg = RunConfig::from_toml_str(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn detect_config_defaults_follow_gsd() {
        let cfg = RunConfig::default();
        let d = cfg.detect_config(0.0063);
        assert_eq!((d.peaks.smooth_window, d.peaks.min_distance), (31, 60));
        assert!(!d.merge);
        assert!((cfg.match_tolerance_m() - 0.1905).abs() < 1e-12);
    }
}
