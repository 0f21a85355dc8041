//! Section-control sprayer replaying a prescription map.
//!
//! The boom drives serpentine passes along the heading axis. At every
//! control tick each nozzle looks up the prescription cell under its center
//! (shifted back by the valve latency) and holds that on/off state for the
//! next tick segment. Sprayed segments are recorded as rectangles, and all
//! coverage areas are computed exactly on the rectangle lattice.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geojson::{self, Collection, Feature};
use crate::geom::{ceil_div, union_areas, Axis, Lattice, Rect};
use crate::prescription::PrescriptionMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprayerConfig {
    pub boom_width_m: f64,
    pub nozzle_spacing_m: f64,
    pub speed_m_s: f64,
    pub control_rate_hz: f64,
    pub valve_latency_s: f64,
    pub heading: Axis,
    /// Nozzle footprint width as a multiple of the spacing.
    pub footprint_factor: f64,
}

impl Default for SprayerConfig {
    fn default() -> Self {
        SprayerConfig {
            boom_width_m: 41.64,
            nozzle_spacing_m: 0.5,
            speed_m_s: 2.917,
            control_rate_hz: 10.0,
            valve_latency_s: 0.0,
            heading: Axis::X,
            footprint_factor: 1.0,
        }
    }
}

impl SprayerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("boom_width_m", self.boom_width_m),
            ("nozzle_spacing_m", self.nozzle_spacing_m),
            ("speed_m_s", self.speed_m_s),
            ("control_rate_hz", self.control_rate_hz),
            ("footprint_factor", self.footprint_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.valve_latency_s >= 0.0 && self.valve_latency_s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "valve_latency_s must be non-negative, got {}",
                self.valve_latency_s
            )));
        }
        if self.nozzle_count() == 0 {
            return Err(Error::InvalidInput("boom holds no nozzle at this spacing".into()));
        }
        Ok(())
    }

    pub fn nozzle_count(&self) -> usize {
        (self.boom_width_m / self.nozzle_spacing_m).round() as usize
    }

    /// Distance travelled between control ticks.
    pub fn tick_distance_m(&self) -> f64 {
        self.speed_m_s / self.control_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pass {
    pub index: usize,
    /// Centerline position on the across axis.
    pub center: f64,
    pub direction: Direction,
}

/// Parallel centerlines one boom width apart covering the across span,
/// centered on it, alternating direction.
pub fn plan_passes(extent: &Rect, config: &SprayerConfig) -> Result<Vec<Pass>> {
    config.validate()?;
    if extent.is_empty() {
        return Err(Error::EmptyGrid("cannot plan passes over an empty extent".into()));
    }
    let (lo, hi) = extent.span(config.heading.other());
    let span = hi - lo;
    let boom = config.boom_width_m;
    let n = ceil_div(span, boom).max(1);
    let first = lo + (span - n as f64 * boom) / 2.0 + boom / 2.0;
    Ok((0..n)
        .map(|i| Pass {
            index: i,
            center: first + i as f64 * boom,
            direction: if i % 2 == 0 { Direction::Forward } else { Direction::Reverse },
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedRect {
    pub rect: Rect,
    pub rate_l_per_ha: f64,
    pub pass: usize,
    pub nozzle: usize,
    pub tick: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsAppliedMap {
    pub extent: Rect,
    pub heading: Axis,
    pub nozzle_spacing_m: f64,
    pub tick_distance_m: f64,
    pub rects: Vec<AppliedRect>,
    /// Union area of `rects`, cached at construction.
    sprayed_m2: f64,
}

impl AsAppliedMap {
    pub fn new(extent: Rect, heading: Axis, nozzle_spacing_m: f64, tick_distance_m: f64, rects: Vec<AppliedRect>) -> Self {
        let plain: Vec<Rect> = rects.iter().map(|r| r.rect).collect();
        let lattice = Lattice::new(&[&plain]);
        let cover = lattice.cover(&plain);
        let sprayed_m2 = lattice.area(heading, |c| cover[c]);
        AsAppliedMap {
            extent,
            heading,
            nozzle_spacing_m,
            tick_distance_m,
            rects,
            sprayed_m2,
        }
    }

    pub fn sprayed_m2(&self) -> f64 {
        self.sprayed_m2
    }

    pub fn sprayed_rects(&self) -> Vec<Rect> {
        self.rects.iter().map(|r| r.rect).collect()
    }
}

pub fn simulate(prescription: &PrescriptionMap, config: &SprayerConfig) -> Result<AsAppliedMap> {
    config.validate()?;
    if !prescription.is_assigned() {
        return Err(Error::InvalidInput("prescription rates are not assigned".into()));
    }
    let extent = prescription.extent;
    let passes = plan_passes(&extent, config)?;
    let along_axis = config.heading;
    let (a, b) = extent.span(along_axis);
    let (across_lo, across_hi) = extent.span(along_axis.other());
    let d = config.tick_distance_m();
    let n_ticks = ceil_div(b - a, d);
    let lag = config.valve_latency_s * config.speed_m_s;
    let nozzles = config.nozzle_count();
    let half_footprint = 0.5 * config.nozzle_spacing_m * config.footprint_factor;
    // tick boundaries within float noise of a grid line are put on it
    let lines = prescription.boundaries(along_axis);
    let snap = |t: f64| -> f64 {
        let k = lines.partition_point(|&l| l < t);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter_map(|i| lines.get(i))
            .find(|&&l| (l - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .copied()
            .unwrap_or(t)
    };

    let per_pass: Vec<Vec<AppliedRect>> = passes
        .par_iter()
        .map(|pass| {
            let mut out = Vec::new();
            let reverse = pass.direction == Direction::Reverse;
            for nozzle in 0..nozzles {
                let offset = (nozzle as f64 - (nozzles as f64 - 1.0) / 2.0) * config.nozzle_spacing_m;
                let center = pass.center + offset;
                let across = ((center - half_footprint).max(across_lo), (center + half_footprint).min(across_hi));
                if across.1 <= across.0 {
                    continue;
                }
                for tick in 0..n_ticks {
                    let (seg, sample) = if reverse {
                        let end = snap(b - tick as f64 * d);
                        ((a.max(snap(b - (tick + 1) as f64 * d)), end), end + lag)
                    } else {
                        let start = snap(a + tick as f64 * d);
                        ((start, b.min(snap(a + (tick + 1) as f64 * d))), start - lag)
                    };
                    if seg.1 <= seg.0 {
                        continue;
                    }
                    let (x, y) = match along_axis {
                        Axis::X => (sample, center),
                        Axis::Y => (center, sample),
                    };
                    let rate = prescription
                        .cell_at_directed(x, y, along_axis, reverse)
                        .and_then(|c| c.rate_l_per_ha)
                        .unwrap_or(0.0);
                    if rate > 0.0 {
                        out.push(AppliedRect {
                            rect: Rect::from_spans(along_axis, seg, across),
                            rate_l_per_ha: rate,
                            pass: pass.index,
                            nozzle,
                            tick,
                        });
                    }
                }
            }
            out
        })
        .collect();
    let rects = per_pass.into_iter().flatten().collect();
    Ok(AsAppliedMap::new(extent, along_axis, config.nozzle_spacing_m, d, rects))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    /// No-spray area in the prescription.
    pub expected_no_spray_m2: f64,
    /// Area the as-applied map left unsprayed.
    pub measured_no_spray_m2: f64,
    /// `measured / expected`; `None` when nothing was meant to stay unsprayed.
    pub accuracy: Option<f64>,
    pub sprayed_m2: f64,
    pub total_m2: f64,
    pub savings_frac: f64,
}

impl AccuracyReport {
    pub fn from_areas(expected_no_spray_m2: f64, measured_no_spray_m2: f64, total_m2: f64) -> Self {
        AccuracyReport {
            expected_no_spray_m2,
            measured_no_spray_m2,
            accuracy: (expected_no_spray_m2 > 0.0).then(|| measured_no_spray_m2 / expected_no_spray_m2),
            sprayed_m2: total_m2 - measured_no_spray_m2,
            total_m2,
            savings_frac: if total_m2 > 0.0 { measured_no_spray_m2 / total_m2 } else { 0.0 },
        }
    }

    pub fn to_report(&self) -> String {
        let acc = self.accuracy.map_or_else(|| "undefined".to_string(), |a| format!("{a:.6}"));
        format!(
            "expected_no_spray_m2={:.6}\nmeasured_no_spray_m2={:.6}\naccuracy={acc}\nsprayed_m2={:.6}\ntotal_m2={:.6}\nsavings_frac={:.6}\n",
            self.expected_no_spray_m2, self.measured_no_spray_m2, self.sprayed_m2, self.total_m2, self.savings_frac
        )
    }
}

/// Expected no-spray area implied by a measured area and an accuracy.
pub fn implied_expected_no_spray(measured_no_spray_m2: f64, accuracy: f64) -> Option<f64> {
    (accuracy > 0.0).then(|| measured_no_spray_m2 / accuracy)
}

fn same_extent(a: &Rect, b: &Rect) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
    close(a.min_x, b.min_x) && close(a.min_y, b.min_y) && close(a.max_x, b.max_x) && close(a.max_y, b.max_y)
}

pub fn application_accuracy(as_applied: &AsAppliedMap, prescription: &PrescriptionMap) -> Result<AccuracyReport> {
    if !same_extent(&as_applied.extent, &prescription.extent) {
        return Err(Error::InvalidInput(format!(
            "as-applied extent {:?} differs from prescription extent {:?}",
            as_applied.extent, prescription.extent
        )));
    }
    if !prescription.is_assigned() {
        return Err(Error::InvalidInput("prescription rates are not assigned".into()));
    }
    let no_spray: Vec<Rect> = prescription
        .cells
        .iter()
        .filter(|c| c.rate_l_per_ha == Some(0.0))
        .map(|c| c.rect)
        .collect();
    let sprayed = as_applied.sprayed_rects();
    let extent = [prescription.extent];
    // one lattice for every layer so matching regions sum identically
    let lattice = Lattice::new(&[&extent, &sprayed, &no_spray]);
    let (in_extent, in_sprayed, in_no_spray) = (lattice.cover(&extent), lattice.cover(&sprayed), lattice.cover(&no_spray));
    let run = as_applied.heading;
    let expected = lattice.area(run, |c| in_no_spray[c]);
    let measured = lattice.area(run, |c| in_extent[c] && !in_sprayed[c]);
    Ok(AccuracyReport::from_areas(expected, measured, prescription.extent.area()))
}

/// Area sprayed but not prescribed plus area prescribed but not sprayed.
pub fn spray_symmetric_difference_m2(as_applied: &AsAppliedMap, prescription: &PrescriptionMap) -> f64 {
    union_areas(&as_applied.sprayed_rects(), &prescription.spray_rects()).symmetric_difference()
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    extent: Rect,
    heading: Axis,
    nozzle_spacing_m: f64,
    tick_distance_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RectProps {
    applied_rate_l_per_ha: f64,
    pass: usize,
    nozzle: usize,
    tick: usize,
}

const KIND: &str = "as-applied";

pub fn export_as_applied(map: &AsAppliedMap, path: &Path) -> Result<()> {
    let features = map
        .rects
        .iter()
        .map(|r| {
            Feature::rectangle(
                &r.rect,
                RectProps {
                    applied_rate_l_per_ha: r.rate_l_per_ha,
                    pass: r.pass,
                    nozzle: r.nozzle,
                    tick: r.tick,
                },
            )
        })
        .collect();
    let header = Header {
        kind: KIND.into(),
        extent: map.extent,
        heading: map.heading,
        nozzle_spacing_m: map.nozzle_spacing_m,
        tick_distance_m: map.tick_distance_m,
    };
    geojson::write(path, &Collection::new(header, features))
}

pub fn import_as_applied(path: &Path) -> Result<AsAppliedMap> {
    let doc: Collection<Header, RectProps> = geojson::read(path)?;
    let h = doc.rowcrop;
    if h.kind != KIND {
        return Err(Error::parse(
            path.display().to_string(),
            format!("document kind is {:?}, not {KIND}", h.kind),
        ));
    }
    if h.extent.is_empty() {
        return Err(Error::parse(path.display().to_string(), "extent has no area"));
    }
    let mut rects = Vec::with_capacity(doc.features.len());
    for (i, f) in doc.features.iter().enumerate() {
        let rect = f.rect().map_err(|m| geojson::feature_error(path, i, m))?;
        if rect.intersection(&h.extent) != Some(rect) {
            return Err(geojson::feature_error(path, i, "rectangle extends past the map extent"));
        }
        let p = &f.properties;
        if !(p.applied_rate_l_per_ha > 0.0 && p.applied_rate_l_per_ha.is_finite()) {
            return Err(geojson::feature_error(
                path,
                i,
                format!("invalid applied rate {}", p.applied_rate_l_per_ha),
            ));
        }
        rects.push(AppliedRect {
            rect,
            rate_l_per_ha: p.applied_rate_l_per_ha,
            pass: p.pass,
            nozzle: p.nozzle,
            tick: p.tick,
        });
    }
    Ok(AsAppliedMap::new(h.extent, h.heading, h.nozzle_spacing_m, h.tick_distance_m, rects))
}
