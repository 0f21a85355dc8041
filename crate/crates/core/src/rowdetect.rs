//! Crop row identification from a vegetation mask.
//!
//! The mask is cut into tiles. Within each tile the set pixels of every
//! pixel-row are counted, giving a profile along the tile's Y axis whose
//! peaks sit on crop rows. Each peak becomes a straight line spanning the
//! tile horizontally.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GeoTransform};

/// Nominal corn row spacing (30 in).
pub const DEFAULT_ROW_SPACING_M: f64 = 0.762;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSpec {
    pub tile_width: usize,
    pub tile_height: usize,
    /// Pixel position of the first full tile boundary.
    pub offset_x: usize,
    pub offset_y: usize,
}

impl Default for TileSpec {
    fn default() -> Self {
        TileSpec {
            tile_width: 3000,
            tile_height: 2000,
            offset_x: 0,
            offset_y: 0,
        }
    }
}

impl TileSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tile_width == 0 || self.tile_height == 0 {
            return Err(Error::InvalidInput("tile dimensions must be at least 1".into()));
        }
        Ok(())
    }
}

/// A rectangular window of a mask, in mask pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub tile_col: usize,
    pub tile_row: usize,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

fn tile_bounds(len: usize, size: usize, offset: usize) -> Vec<(usize, usize)> {
    let offset = offset % size;
    let mut bounds = Vec::new();
    let mut start = 0;
    let mut end = if offset == 0 { size } else { offset };
    while start < len {
        let e = end.min(len);
        bounds.push((start, e - start));
        start = e;
        end = e + size;
    }
    bounds
}

/// Splits the mask into tiles; edge tiles are truncated.
pub fn tile_mask(mask: &BinaryMask, spec: &TileSpec) -> Result<Vec<Tile>> {
    spec.validate()?;
    let cols = tile_bounds(mask.width(), spec.tile_width, spec.offset_x);
    let rows = tile_bounds(mask.height(), spec.tile_height, spec.offset_y);
    let mut tiles = Vec::with_capacity(cols.len() * rows.len());
    for (tile_row, &(y0, height)) in rows.iter().enumerate() {
        for (tile_col, &(x0, width)) in cols.iter().enumerate() {
            tiles.push(Tile {
                tile_col,
                tile_row,
                x0,
                y0,
                width,
                height,
            });
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionProfile {
    pub tile: Tile,
    /// Set pixels per pixel-row of the tile.
    pub sums: Vec<u32>,
}

pub fn projection_profile(mask: &BinaryMask, tile: &Tile) -> ProjectionProfile {
    let sums = (tile.y0..tile.y0 + tile.height)
        .map(|row| mask.count_ones_in_row(row, tile.x0, tile.x0 + tile.width))
        .collect();
    ProjectionProfile { tile: *tile, sums }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub smooth_window: usize,
    pub min_distance: usize,
    /// Fraction of the smoothed profile maximum.
    pub min_prominence: f64,
}

impl PeakParams {
    /// Defaults scaled to the row spacing in pixels: smoothing over a quarter
    /// spacing (forced odd), peaks at least half a spacing apart.
    pub fn for_row_spacing(row_spacing_m: f64, gsd_m: f64) -> Self {
        let spacing_px = row_spacing_m / gsd_m;
        let mut smooth_window = ((0.25 * spacing_px).round() as usize).max(1);
        if smooth_window.is_multiple_of(2) {
            smooth_window += 1;
        }
        PeakParams {
            smooth_window,
            min_distance: ((0.5 * spacing_px).round() as usize).max(1),
            min_prominence: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "smooth_window must be odd and >= 1, got {}",
                self.smooth_window
            )));
        }
        if self.min_distance == 0 {
            return Err(Error::InvalidInput("min_distance must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_prominence) {
            return Err(Error::InvalidInput(format!(
                "min_prominence must lie in [0, 1], got {}",
                self.min_prominence
            )));
        }
        Ok(())
    }
}

/// Centered moving average; the window shrinks at the ends.
pub fn smooth(values: &[u32], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    for &v in values {
        prefix.push(prefix.last().unwrap() + f64::from(v));
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Height of `s[p]` above the higher of the two minima that separate it from
/// taller samples. The profile is treated as zero outside its ends.
fn prominence(s: &[f64], p: usize) -> f64 {
    let h = s[p];
    let side_min = |iter: &mut dyn Iterator<Item = usize>| {
        let mut m = h;
        for i in iter {
            if s[i] > h {
                return m;
            }
            m = m.min(s[i]);
        }
        m.min(0.0)
    };
    let left = side_min(&mut (0..p).rev());
    let right = side_min(&mut (p + 1..s.len()));
    h - left.max(right)
}

/// Strict local maxima; a plateau counts once, at its center (rounded down).
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let n = s.len();
    let mut peaks = Vec::new();
    let mut a = 0;
    while a < n {
        let mut b = a;
        while b + 1 < n && s[b + 1] == s[a] {
            b += 1;
        }
        let left = if a == 0 { 0.0 } else { s[a - 1] };
        let right = if b + 1 == n { 0.0 } else { s[b + 1] };
        if s[a] > left && s[a] > right {
            peaks.push((a + b) / 2);
        }
        a = b + 1;
    }
    peaks
}

/// Peak rows of a projection profile, ascending.
///
/// Smoothing, strict local maxima, a prominence floor relative to the
/// smoothed maximum, then greedy tallest-first suppression of anything closer
/// than `min_distance` to an accepted peak.
pub fn find_peaks(profile: &[u32], params: &PeakParams) -> Result<Vec<usize>> {
    params.validate()?;
    let s = smooth(profile, params.smooth_window);
    let max = s.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = params.min_prominence * max;
    let mut candidates: Vec<usize> = local_maxima(&s)
        .into_iter()
        .filter(|&p| prominence(&s, p) >= floor)
        .collect();
    candidates.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|&p| p.abs_diff(c) >= params.min_distance) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    Ok(accepted)
}

/// A detected (or ground-truth) crop-row segment in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLine {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub tile_col: Option<usize>,
    pub tile_row: Option<usize>,
    /// Peak row in full-mask pixel coordinates.
    pub peak_row_px: Option<f64>,
    /// Merge weight: set pixels on the peak row. Not persisted.
    pub weight: f64,
}

impl RowLine {
    pub fn horizontal(x1: f64, x2: f64, y: f64) -> Self {
        RowLine {
            x1,
            y1: y,
            x2,
            y2: y,
            tile_col: None,
            tile_row: None,
            peak_row_px: None,
            weight: 1.0,
        }
    }

    /// Mean perpendicular (Y) coordinate.
    pub fn position(&self) -> f64 {
        0.5 * (self.y1 + self.y2)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x1.min(self.x2), self.x1.max(self.x2))
    }
}

/// One horizontal line per peak, spanning the tile's pixel centers.
pub fn emit_row_lines(peaks: &[usize], tile: &Tile, geo: &GeoTransform) -> Vec<RowLine> {
    let (c0, c1) = if tile.width > 1 {
        (tile.x0 as f64, (tile.x0 + tile.width - 1) as f64)
    } else {
        (tile.x0 as f64 - 0.5, tile.x0 as f64 + 0.5)
    };
    peaks
        .iter()
        .map(|&p| {
            let row = (tile.y0 + p) as f64;
            let (x1, y1) = geo.pixel_to_world(c0, row);
            let (x2, y2) = geo.pixel_to_world(c1, row);
            RowLine {
                x1,
                y1,
                x2,
                y2,
                tile_col: Some(tile.tile_col),
                tile_row: Some(tile.tile_row),
                peak_row_px: Some(row),
                weight: 1.0,
            }
        })
        .collect()
}

fn line_order(a: &RowLine, b: &RowLine) -> std::cmp::Ordering {
    a.tile_col
        .cmp(&b.tile_col)
        .then(b.position().total_cmp(&a.position()))
        .then(a.x1.total_cmp(&b.x1))
        .then(a.tile_row.cmp(&b.tile_row))
}

/// Collapses lines of the same tile column that lie closer than
/// `min_separation_m` into their weight-weighted mean. Clusters chain
/// transitively. With `enabled == false` the input is returned unchanged.
pub fn merge_duplicate_lines(lines: Vec<RowLine>, min_separation_m: f64, enabled: bool) -> Vec<RowLine> {
    if !enabled {
        return lines;
    }
    let mut groups: BTreeMap<Option<usize>, Vec<RowLine>> = BTreeMap::new();
    for l in lines {
        groups.entry(l.tile_col).or_default().push(l);
    }
    let mut out = Vec::new();
    for (_, mut group) in groups {
        group.sort_by(|a, b| a.position().total_cmp(&b.position()));
        let mut cluster: Vec<RowLine> = Vec::new();
        for l in group {
            if let Some(last) = cluster.last() {
                if l.position() - last.position() >= min_separation_m {
                    out.push(collapse(std::mem::take(&mut cluster)));
                }
            }
            cluster.push(l);
        }
        if !cluster.is_empty() {
            out.push(collapse(cluster));
        }
    }
    out.sort_by(line_order);
    out
}

fn collapse(mut cluster: Vec<RowLine>) -> RowLine {
    if cluster.len() == 1 {
        return cluster.pop().unwrap();
    }
    let total: f64 = cluster.iter().map(|l| l.weight).sum();
    let w = |l: &RowLine| if total > 0.0 { l.weight / total } else { 1.0 / cluster.len() as f64 };
    let y: f64 = cluster.iter().map(|l| w(l) * l.position()).sum();
    let peak_row_px = cluster
        .iter()
        .map(|l| l.peak_row_px.map(|p| w(l) * p))
        .sum::<Option<f64>>();
    let heaviest = cluster
        .iter()
        .fold(&cluster[0], |best, l| if l.weight > best.weight { l } else { best });
    let x1 = cluster.iter().map(|l| l.x_range().0).fold(f64::INFINITY, f64::min);
    let x2 = cluster.iter().map(|l| l.x_range().1).fold(f64::NEG_INFINITY, f64::max);
    RowLine {
        x1,
        y1: y,
        x2,
        y2: y,
        tile_col: heaviest.tile_col,
        tile_row: heaviest.tile_row,
        peak_row_px,
        weight: total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub tile: TileSpec,
    pub peaks: PeakParams,
    pub merge: bool,
    pub merge_separation_m: f64,
}

impl DetectConfig {
    pub fn for_row_spacing(row_spacing_m: f64, gsd_m: f64) -> Self {
        DetectConfig {
            tile: TileSpec::default(),
            peaks: PeakParams::for_row_spacing(row_spacing_m, gsd_m),
            merge: false,
            merge_separation_m: 0.4 * row_spacing_m,
        }
    }
}

/// Full row detection: tile, profile, peaks, lines, optional merge.
///
/// Tiles run in parallel; the output order only depends on the inputs.
pub fn detect_rows(mask: &BinaryMask, config: &DetectConfig) -> Result<Vec<RowLine>> {
    config.peaks.validate()?;
    let geo = mask.geo();
    let tiles = tile_mask(mask, &config.tile)?;
    let per_tile: Vec<Vec<RowLine>> = tiles
        .par_iter()
        .map(|tile| {
            let profile = projection_profile(mask, tile);
            let peaks = find_peaks(&profile.sums, &config.peaks)?;
            let mut lines = emit_row_lines(&peaks, tile, &geo);
            for (line, &p) in lines.iter_mut().zip(&peaks) {
                line.weight = f64::from(profile.sums[p]);
            }
            Ok(lines)
        })
        .collect::<Result<_>>()?;
    let mut lines: Vec<RowLine> = per_tile.into_iter().flatten().collect();
    lines.sort_by(line_order);
    Ok(merge_duplicate_lines(lines, config.merge_separation_m, config.merge))
}

/// Cuts full-length lines (e.g. ground truth) at the tile-column boundaries a
/// detector would use, so each piece can be matched against one tile's lines.
pub fn split_at_tile_columns(lines: &[RowLine], mask_width: usize, geo: &GeoTransform, spec: &TileSpec) -> Vec<RowLine> {
    let columns = tile_bounds(mask_width, spec.tile_width.max(1), spec.offset_x);
    let mut out = Vec::new();
    for line in lines {
        let (lx0, lx1) = line.x_range();
        for (tile_col, &(x0, w)) in columns.iter().enumerate() {
            let (cx0, _) = geo.pixel_to_world(x0 as f64 - 0.5, 0.0);
            let (cx1, _) = geo.pixel_to_world((x0 + w) as f64 - 0.5, 0.0);
            let (a, b) = (lx0.max(cx0), lx1.min(cx1));
            if b > a {
                let mut piece = line.clone();
                piece.x1 = a;
                piece.x2 = b;
                piece.tile_col = Some(tile_col);
                out.push(piece);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvaluation {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    /// `None` where the ratio has a zero denominator.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl DetectionEvaluation {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        DetectionEvaluation {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
        }
    }

    /// `key=value` lines; undefined metrics read `undefined`.
    pub fn to_report(&self) -> String {
        let m = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
        format!(
            "tp={}\nfp={}\nfn={}\ntn={}\nprecision={}\nrecall={}\nf1={}\naccuracy={}\n",
            self.tp,
            self.fp,
            self.fn_,
            self.tn,
            m(self.precision),
            m(self.recall),
            m(self.f1),
            m(self.accuracy)
        )
    }
}

/// One-to-one greedy matching of detected to true rows by perpendicular
/// distance. Only lines whose X extents overlap can match. TN is always 0.
pub fn evaluate_detection(detected: &[RowLine], truth: &[RowLine], match_tolerance_m: f64) -> DetectionEvaluation {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        let (d0, d1) = d.x_range();
        for (j, t) in truth.iter().enumerate() {
            let (t0, t1) = t.x_range();
            if d1.min(t1) <= d0.max(t0) {
                continue;
            }
            let dist = (d.position() - t.position()).abs();
            if dist <= match_tolerance_m {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    let mut tp = 0u64;
    for (_, i, j) in pairs {
        if !used_d[i] && !used_t[j] {
            used_d[i] = true;
            used_t[j] = true;
            tp += 1;
        }
    }
    DetectionEvaluation::from_counts(tp, detected.len() as u64 - tp, truth.len() as u64 - tp, 0)
}

/// Rotation (degrees) that best aligns the rows with the X axis.
///
/// Pixels inside the inscribed disk are projected onto the rotated Y axis;
/// the angle maximizing the pixel-weighted variance of the per-bin fill
/// fraction wins. Using a disk and fractions keeps the score free of the
/// bias that a rotated rectangle's uneven bin lengths would add. Ties go to
/// the angle closest to 0.
pub fn estimate_row_orientation(mask: &BinaryMask, max_angle_deg: f64, step_deg: f64) -> Result<f64> {
    if step_deg.is_nan() || step_deg <= 0.0 {
        return Err(Error::InvalidInput("angle step must be positive".into()));
    }
    if mask.is_empty() {
        return Err(Error::UndefinedOrientation);
    }
    let (w, h) = (mask.width(), mask.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let radius = w.min(h) as f64 / 2.0;
    let disk_pixels = std::f64::consts::PI * radius * radius;
    let stride = ((disk_pixels / 250_000.0).sqrt().ceil() as usize).max(1);

    let mut samples: Vec<(f64, f64, bool)> = Vec::new();
    for row in (0..h).step_by(stride) {
        for col in (0..w).step_by(stride) {
            let (dx, dy) = (col as f64 - cx, row as f64 - cy);
            if dx * dx + dy * dy <= radius * radius {
                samples.push((dx, dy, mask.get(col, row)));
            }
        }
    }
    if !samples.iter().any(|s| s.2) {
        return Err(Error::UndefinedOrientation);
    }

    let max_angle = max_angle_deg.clamp(0.0, 45.0);
    let k_max = (max_angle / step_deg + 1e-9).floor() as i64;
    let nbins = (2.0 * radius / stride as f64).ceil() as usize + 3;
    let offset = (nbins / 2) as i64;
    let score = |theta: f64| {
        let (sin, cos) = theta.to_radians().sin_cos();
        let mut totals = vec![0u32; nbins];
        let mut ones = vec![0u32; nbins];
        for &(dx, dy, set) in &samples {
            let v = ((dx * sin + dy * cos) / stride as f64).round() as i64 + offset;
            let b = v.clamp(0, nbins as i64 - 1) as usize;
            totals[b] += 1;
            ones[b] += u32::from(set);
        }
        let n: f64 = totals.iter().map(|&t| f64::from(t)).sum();
        let mean = ones.iter().map(|&o| f64::from(o)).sum::<f64>() / n;
        totals
            .iter()
            .zip(&ones)
            .filter(|(t, _)| **t > 0)
            .map(|(&t, &o)| {
                let f = f64::from(o) / f64::from(t);
                f64::from(t) * (f - mean) * (f - mean)
            })
            .sum::<f64>()
            / n
    };
    let mut best_angle = 0.0;
    let mut best = score(0.0);
    for k in 1..=k_max {
        for angle in [k as f64 * step_deg, -(k as f64) * step_deg] {
            let s = score(angle);
            if s > best + 1e-9 * best.abs().max(1e-12) {
                best = s;
                best_angle = angle;
            }
        }
    }
    Ok(best_angle)
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRecord {
    x1_m: f64,
    y1_m: f64,
    x2_m: f64,
    y2_m: f64,
    tile_col: Option<usize>,
    tile_row: Option<usize>,
    peak_row_px: Option<f64>,
}

pub fn write_row_lines(path: &Path, lines: &[RowLine]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    if lines.is_empty() {
        w.write_record(["x1_m", "y1_m", "x2_m", "y2_m", "tile_col", "tile_row", "peak_row_px"])
            .map_err(|e| csv_err(path, e))?;
    }
    for l in lines {
        w.serialize(LineRecord {
            x1_m: l.x1,
            y1_m: l.y1,
            x2_m: l.x2,
            y2_m: l.y2,
            tile_col: l.tile_col,
            tile_row: l.tile_row,
            peak_row_px: l.peak_row_px,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads row lines; the tile and peak columns may be absent (ground truth).
pub fn read_row_lines(path: &Path) -> Result<Vec<RowLine>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    for required in ["x1_m", "y1_m", "x2_m", "y2_m"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::parse(path.display().to_string(), format!("missing column {required}")));
        }
    }
    let mut lines = Vec::new();
    for rec in r.deserialize::<LineRecord>() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        lines.push(RowLine {
            x1: rec.x1_m,
            y1: rec.y1_m,
            x2: rec.x2_m,
            y2: rec.y2_m,
            tile_col: rec.tile_col,
            tile_row: rec.tile_row,
            peak_row_px: rec.peak_row_px,
            weight: 1.0,
        });
    }
    Ok(lines)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let context = match e.position() {
        Some(pos) => format!("{} (line {}, record {})", path.display(), pos.line(), pos.record()),
        None => path.display().to_string(),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(context, format!("{kind:?}")),
    }
}
