//! Weed mask from vegetation minus buffered crop rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GeoTransform};
use crate::rowdetect::{csv_err, RowLine};

/// 3.5 in on each side of a row line.
pub const DEFAULT_BUFFER_HALF_WIDTH_M: f64 = 0.0889;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferSpec {
    pub half_width_m: f64,
}

impl Default for BufferSpec {
    fn default() -> Self {
        BufferSpec {
            half_width_m: DEFAULT_BUFFER_HALF_WIDTH_M,
        }
    }
}

impl BufferSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width_m > 0.0 && self.half_width_m.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "buffer half width must be positive, got {}",
                self.half_width_m
            )));
        }
        Ok(())
    }
}

/// Crop zone: pixels whose center lies within `half_width_m` of a row
/// segment, measured perpendicular to it. Segment ends are cut flat.
pub fn buffer_rows(
    lines: &[RowLine],
    spec: &BufferSpec,
    geo: &GeoTransform,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    spec.validate()?;
    let mut zone = BinaryMask::new(width, height, *geo)?;
    let hw = spec.half_width_m;
    for line in lines {
        let (dx, dy) = (line.x2 - line.x1, line.y2 - line.y1);
        let len = dx.hypot(dy);
        if len.is_nan() || len <= 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        // pixel window around the segment's bounding box
        let (min_x, max_x) = (line.x1.min(line.x2) - hw, line.x1.max(line.x2) + hw);
        let (min_y, max_y) = (line.y1.min(line.y2) - hw, line.y1.max(line.y2) + hw);
        let (c_a, r_a) = geo.world_to_pixel(min_x, max_y);
        let (c_b, r_b) = geo.world_to_pixel(max_x, min_y);
        if c_b < 0.0 || r_b < 0.0 || c_a > width as f64 || r_a > height as f64 {
            continue;
        }
        let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64 - 1.0) as usize;
        let (c0, c1) = (clamp(c_a.floor(), width), clamp(c_b.ceil(), width));
        let (r0, r1) = (clamp(r_a.floor(), height), clamp(r_b.ceil(), height));
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (px, py) = geo.pixel_to_world(col as f64, row as f64);
                let (vx, vy) = (px - line.x1, py - line.y1);
                let along = vx * ux + vy * uy;
                if along < 0.0 || along > len {
                    continue;
                }
                let across = (vx * uy - vy * ux).abs();
                if across <= hw {
                    zone.set(col, row, true);
                }
            }
        }
    }
    Ok(zone)
}

/// `vegetation AND NOT crop_zone`.
pub fn extract_weeds(vegetation: &BinaryMask, crop_zone: &BinaryMask) -> Result<BinaryMask> {
    vegetation.and_not(crop_zone)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PixelBox {
    pub min_col: usize,
    pub min_row: usize,
    pub max_col: usize,
    pub max_row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeedRegion {
    pub id: usize,
    pub pixels: u64,
    pub area_m2: f64,
    pub bbox: PixelBox,
    pub centroid_x_m: f64,
    pub centroid_y_m: f64,
}

/// Maximal 8-connected components, ordered by bounding-box (min row, min col).
pub fn connected_components(mask: &BinaryMask) -> Vec<WeedRegion> {
    let (w, h) = (mask.width(), mask.height());
    let geo = mask.geo();
    let mut seen = BinaryMask::new(w, h, geo).expect("mask dimensions are positive");
    let mut stack: Vec<(usize, usize)> = Vec::new();
    // keyed by first pixel in raster order for a total ordering
    let mut found: Vec<((usize, usize), WeedRegion)> = Vec::new();

    for (col, row) in mask.iter_ones() {
        if seen.get(col, row) {
            continue;
        }
        seen.set(col, row, true);
        stack.push((col, row));
        let mut bbox = PixelBox {
            min_col: col,
            min_row: row,
            max_col: col,
            max_row: row,
        };
        let (mut n, mut sum_c, mut sum_r) = (0u64, 0.0f64, 0.0f64);
        while let Some((c, r)) = stack.pop() {
            n += 1;
            sum_c += c as f64;
            sum_r += r as f64;
            bbox.min_col = bbox.min_col.min(c);
            bbox.max_col = bbox.max_col.max(c);
            bbox.min_row = bbox.min_row.min(r);
            bbox.max_row = bbox.max_row.max(r);
            for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    if mask.get(nc, nr) && !seen.get(nc, nr) {
                        seen.set(nc, nr, true);
                        stack.push((nc, nr));
                    }
                }
            }
        }
        let (cx, cy) = geo.pixel_to_world(sum_c / n as f64, sum_r / n as f64);
        found.push((
            (row, col),
            WeedRegion {
                id: 0,
                pixels: n,
                area_m2: n as f64 * geo.pixel_area(),
                bbox,
                centroid_x_m: cx,
                centroid_y_m: cy,
            },
        ));
    }
    found.sort_by_key(|(first, r)| (r.bbox.min_row, r.bbox.min_col, *first));
    found
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut r))| {
            r.id = i + 1;
            r
        })
        .collect()
}

pub fn mask_area_m2(mask: &BinaryMask, geo: &GeoTransform) -> f64 {
    mask.count_ones() as f64 * geo.pixel_area()
}

#[derive(Serialize)]
struct RegionRecord {
    id: usize,
    pixels: u64,
    area_m2: f64,
    centroid_x_m: f64,
    centroid_y_m: f64,
}

pub fn write_regions(path: &Path, regions: &[WeedRegion]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    if regions.is_empty() {
        w.write_record(["id", "pixels", "area_m2", "centroid_x_m", "centroid_y_m"])
            .map_err(|e| csv_err(path, e))?;
    }
    for r in regions {
        w.serialize(RegionRecord {
            id: r.id,
            pixels: r.pixels,
            area_m2: r.area_m2,
            centroid_x_m: r.centroid_x_m,
            centroid_y_m: r.centroid_y_m,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
