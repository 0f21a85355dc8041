//! Spray-decision grid over the treatment extent.
//!
//! Cells are half-open rectangles anchored at the grid origin. A cell is
//! sprayed at the configured rate when at least one weed pixel center falls
//! inside it, and left off otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geojson::{self, Collection, Feature};
use crate::geom::{Axis, Rect};
use crate::raster::BinaryMask;

/// Herbicide mix rate for cells holding weeds.
pub const DEFAULT_SPRAY_RATE_L_PER_HA: f64 = 140.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell size perpendicular to travel (1.67 ft).
    pub cell_across_m: f64,
    /// Cell size along travel (10 ft).
    pub cell_along_m: f64,
    /// Grid anchor; `None` anchors at the extent's minimum corner.
    pub origin: Option<[f64; 2]>,
    pub travel_axis: Axis,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cell_across_m: 0.509,
            cell_along_m: 3.048,
            origin: None,
            travel_axis: Axis::X,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cell_across_m", self.cell_across_m), ("cell_along_m", self.cell_along_m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Cell size along world X and world Y.
    pub fn cell_size_xy(&self) -> (f64, f64) {
        match self.travel_axis {
            Axis::X => (self.cell_along_m, self.cell_across_m),
            Axis::Y => (self.cell_across_m, self.cell_along_m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rect: Rect,
    /// Index along world Y from the grid's first row.
    pub row: usize,
    /// Index along world X.
    pub col: usize,
    /// `None` until rates are assigned.
    pub rate_l_per_ha: Option<f64>,
    pub weed_pixels: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrescriptionMap {
    pub spec: GridSpec,
    pub extent: Rect,
    pub spray_rate_l_per_ha: f64,
    /// Cell boundaries along X (`ncols + 1` values) and Y (`nrows + 1`).
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major.
    pub cells: Vec<Cell>,
}

/// Boundaries of grid lines `origin + k * size` inside `(lo, hi)`, plus the
/// ends. Lines within a hair of an end are dropped so no sliver cells appear.
fn boundaries(lo: f64, hi: f64, origin: f64, size: f64) -> Vec<f64> {
    let eps = 1e-9 * size;
    let mut out = vec![lo];
    let mut k = ((lo - origin) / size).floor() as i64;
    loop {
        let b = origin + k as f64 * size;
        if b >= hi - eps {
            break;
        }
        if b > lo + eps {
            out.push(b);
        }
        k += 1;
    }
    out.push(hi);
    out
}

/// Index `i` with `bounds[i] <= v < bounds[i + 1]`.
fn locate(bounds: &[f64], v: f64) -> Option<usize> {
    let i = bounds.partition_point(|&b| b <= v);
    (i > 0 && i < bounds.len()).then(|| i - 1)
}

/// Index `i` with `bounds[i] < v <= bounds[i + 1]`, for reverse travel.
fn locate_upper(bounds: &[f64], v: f64) -> Option<usize> {
    let i = bounds.partition_point(|&b| b < v);
    (i > 0 && i < bounds.len()).then(|| i - 1)
}

/// Overlays the grid on `extent`; edge cells are truncated and rates unset.
pub fn build_grid(extent: Rect, spec: &GridSpec, spray_rate_l_per_ha: f64) -> Result<PrescriptionMap> {
    spec.validate()?;
    if !(spray_rate_l_per_ha >= 0.0 && spray_rate_l_per_ha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "spray rate must be non-negative, got {spray_rate_l_per_ha}"
        )));
    }
    if extent.is_empty() {
        return Err(Error::EmptyGrid(format!(
            "extent {}x{} m has no area",
            extent.width(),
            extent.height()
        )));
    }
    let (cw, ch) = spec.cell_size_xy();
    let [ox, oy] = spec.origin.unwrap_or([extent.min_x, extent.min_y]);
    let xs = boundaries(extent.min_x, extent.max_x, ox, cw);
    let ys = boundaries(extent.min_y, extent.max_y, oy, ch);
    let mut cells = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
    for row in 0..ys.len() - 1 {
        for col in 0..xs.len() - 1 {
            cells.push(Cell {
                rect: Rect::new(xs[col], ys[row], xs[col + 1], ys[row + 1]),
                row,
                col,
                rate_l_per_ha: None,
                weed_pixels: 0,
            });
        }
    }
    Ok(PrescriptionMap {
        spec: *spec,
        extent,
        spray_rate_l_per_ha,
        xs,
        ys,
        cells,
    })
}

impl PrescriptionMap {
    pub fn ncols(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn is_assigned(&self) -> bool {
        self.cells.iter().all(|c| c.rate_l_per_ha.is_some())
    }

    /// Cell owning `(x, y)` under the half-open rule.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<&Cell> {
        let col = locate(&self.xs, x)?;
        let row = locate(&self.ys, y)?;
        Some(&self.cells[row * self.ncols() + col])
    }

    /// Cell lookup for a point moving along `axis`; with `reverse` the cell
    /// being entered owns its upper boundary on that axis.
    pub fn cell_at_directed(&self, x: f64, y: f64, axis: Axis, reverse: bool) -> Option<&Cell> {
        let col = if reverse && axis == Axis::X { locate_upper(&self.xs, x) } else { locate(&self.xs, x) }?;
        let row = if reverse && axis == Axis::Y { locate_upper(&self.ys, y) } else { locate(&self.ys, y) }?;
        Some(&self.cells[row * self.ncols() + col])
    }

    /// Rectangles of the cells that are sprayed.
    /// Grid lines along `axis`, extent edges included.
    pub fn boundaries(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.xs,
            Axis::Y => &self.ys,
        }
    }

    pub fn spray_rects(&self) -> Vec<Rect> {
        self.cells
            .iter()
            .filter(|c| c.rate_l_per_ha.is_some_and(|r| r > 0.0))
            .map(|c| c.rect)
            .collect()
    }
}

/// Counts weed pixel centers per cell and sets each cell's rate.
pub fn assign_rates(map: &PrescriptionMap, weeds: &BinaryMask) -> Result<PrescriptionMap> {
    let mask_extent = weeds.extent();
    let tol = 1e-6;
    if map.extent.min_x < mask_extent.min_x - tol
        || map.extent.min_y < mask_extent.min_y - tol
        || map.extent.max_x > mask_extent.max_x + tol
        || map.extent.max_y > mask_extent.max_y + tol
    {
        return Err(Error::InvalidInput(format!(
            "weed mask extent {mask_extent:?} does not cover the grid extent {:?}",
            map.extent
        )));
    }
    let geo = weeds.geo();
    let col_cell: Vec<Option<usize>> = (0..weeds.width())
        .map(|c| locate(&map.xs, geo.pixel_to_world(c as f64, 0.0).0))
        .collect();
    let row_cell: Vec<Option<usize>> = (0..weeds.height())
        .map(|r| locate(&map.ys, geo.pixel_to_world(0.0, r as f64).1))
        .collect();
    let ncols = map.ncols();
    let mut counts = vec![0u64; map.cells.len()];
    for (c, r) in weeds.iter_ones() {
        if let (Some(cc), Some(rr)) = (col_cell[c], row_cell[r]) {
            counts[rr * ncols + cc] += 1;
        }
    }
    let mut out = map.clone();
    for (cell, n) in out.cells.iter_mut().zip(counts) {
        cell.weed_pixels = n;
        cell.rate_l_per_ha = Some(if n >= 1 { map.spray_rate_l_per_ha } else { 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrescriptionStats {
    pub cells_total: usize,
    pub cells_no_spray: usize,
    pub cells_spray: usize,
    pub frac_no_spray: f64,
    pub area_no_spray_m2: f64,
    pub area_spray_m2: f64,
}

impl PrescriptionStats {
    pub fn to_report(&self) -> String {
        format!(
            "cells_total={}\ncells_no_spray={}\ncells_spray={}\nfrac_no_spray={:.6}\narea_no_spray_m2={:.6}\narea_spray_m2={:.6}\n",
            self.cells_total,
            self.cells_no_spray,
            self.cells_spray,
            self.frac_no_spray,
            self.area_no_spray_m2,
            self.area_spray_m2
        )
    }
}

pub fn prescription_stats(map: &PrescriptionMap) -> Result<PrescriptionStats> {
    let mut stats = PrescriptionStats {
        cells_total: map.cells.len(),
        cells_no_spray: 0,
        cells_spray: 0,
        frac_no_spray: 0.0,
        area_no_spray_m2: 0.0,
        area_spray_m2: 0.0,
    };
    for cell in &map.cells {
        let rate = cell
            .rate_l_per_ha
            .ok_or_else(|| Error::InvalidInput("prescription rates are not assigned".into()))?;
        if rate > 0.0 {
            stats.cells_spray += 1;
            stats.area_spray_m2 += cell.rect.area();
        } else {
            stats.cells_no_spray += 1;
            stats.area_no_spray_m2 += cell.rect.area();
        }
    }
    if stats.cells_total > 0 {
        stats.frac_no_spray = stats.cells_no_spray as f64 / stats.cells_total as f64;
    }
    Ok(stats)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    extent: Rect,
    grid: GridSpec,
    spray_rate_l_per_ha: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CellProps {
    rate_l_per_ha: f64,
    row: usize,
    col: usize,
    weed_pixels: u64,
}

const KIND: &str = "prescription";

pub fn export_prescription(map: &PrescriptionMap, path: &Path) -> Result<()> {
    if !map.is_assigned() {
        return Err(Error::InvalidInput("cannot export a prescription without rates".into()));
    }
    let features = map
        .cells
        .iter()
        .map(|c| {
            Feature::rectangle(
                &c.rect,
                CellProps {
                    rate_l_per_ha: c.rate_l_per_ha.unwrap_or(0.0),
                    row: c.row,
                    col: c.col,
                    weed_pixels: c.weed_pixels,
                },
            )
        })
        .collect();
    let header = Header {
        kind: KIND.into(),
        extent: map.extent,
        grid: map.spec,
        spray_rate_l_per_ha: map.spray_rate_l_per_ha,
    };
    geojson::write(path, &Collection::new(header, features))
}

pub fn import_prescription(path: &Path) -> Result<PrescriptionMap> {
    let doc: Collection<Header, CellProps> = geojson::read(path)?;
    let ctx = || path.display().to_string();
    if doc.rowcrop.kind != KIND {
        return Err(Error::parse(ctx(), format!("document kind is {:?}, not {KIND}", doc.rowcrop.kind)));
    }
    if doc.features.is_empty() {
        return Err(Error::EmptyGrid(format!("{} has no cells", path.display())));
    }
    let mut map = build_grid(doc.rowcrop.extent, &doc.rowcrop.grid, doc.rowcrop.spray_rate_l_per_ha)
        .map_err(|e| Error::parse(ctx(), e))?;
    if doc.features.len() != map.cells.len() {
        return Err(Error::parse(
            ctx(),
            format!("{} features for a grid of {} cells", doc.features.len(), map.cells.len()),
        ));
    }
    let ncols = map.ncols();
    let spray = map.spray_rate_l_per_ha;
    for (i, f) in doc.features.iter().enumerate() {
        let rect = f.rect().map_err(|m| geojson::feature_error(path, i, m))?;
        let p = &f.properties;
        if !(p.rate_l_per_ha >= 0.0 && p.rate_l_per_ha.is_finite()) {
            return Err(geojson::feature_error(path, i, format!("invalid rate {}", p.rate_l_per_ha)));
        }
        if p.rate_l_per_ha != 0.0 && p.rate_l_per_ha != spray {
            return Err(geojson::feature_error(
                path,
                i,
                format!("rate {} is neither 0 nor the spray rate {spray}", p.rate_l_per_ha),
            ));
        }
        if (p.rate_l_per_ha > 0.0) != (p.weed_pixels >= 1) {
            return Err(geojson::feature_error(path, i, "rate disagrees with weed_pixels"));
        }
        if p.row >= map.nrows() || p.col >= ncols {
            return Err(geojson::feature_error(path, i, format!("cell ({}, {}) outside grid", p.row, p.col)));
        }
        let cell = &mut map.cells[p.row * ncols + p.col];
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6;
        if !(close(rect.min_x, cell.rect.min_x)
            && close(rect.min_y, cell.rect.min_y)
            && close(rect.max_x, cell.rect.max_x)
            && close(rect.max_y, cell.rect.max_y))
        {
            return Err(geojson::feature_error(path, i, "ring does not match the grid cell"));
        }
        if cell.rate_l_per_ha.is_some() {
            return Err(geojson::feature_error(path, i, "duplicate cell"));
        }
        cell.rate_l_per_ha = Some(p.rate_l_per_ha);
        cell.weed_pixels = p.weed_pixels;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let spec = GridSpec::default();
        let one = build_grid(Rect::new(0.0, 0.0, 3.048, 0.509), &spec, 140.3).unwrap();
        assert_eq!(one.cells.len(), 1);

        let plot = GridSpec {
            travel_axis: Axis::Y,
            ..GridSpec::default()
        };
        let map = build_grid(Rect::new(0.0, 0.0, 41.64, 121.92), &plot, 140.3).unwrap();
        assert_eq!((map.ncols(), map.nrows()), (82, 40));
        assert_eq!(map.cells.len(), 3280);
        let last = map.cells.last().unwrap();
        assert_abs_diff_eq!(last.rect.width(), 41.64 - 81.0 * 0.509, epsilon = 1e-9);

        assert!(matches!(
            build_grid(Rect::new(0.0, 0.0, 0.0, 5.0), &spec, 140.3),
            Err(Error::EmptyGrid(_))
        ));
    }

    #[test]
    fn grid_origin_offset_truncates_first_cells() {
        let spec = GridSpec {
            cell_across_m: 1.0,
            cell_along_m: 1.0,
            origin: Some([0.25, -3.0]),
            travel_axis: Axis::X,
        };
        let map = build_grid(Rect::new(0.0, 0.0, 2.0, 1.0), &spec, 1.0).unwrap();
        let widths: Vec<f64> = map.cells.iter().map(|c| c.rect.width()).collect();
        assert_eq!(widths, vec![0.25, 1.0, 0.75]);
    }

    fn unit_mask(w: usize, h: usize, f: impl FnMut(usize, usize) -> bool) -> BinaryMask {
        // 1 m pixels, lower-left corner at the origin
        BinaryMask::from_fn(w, h, GeoTransform::north_up(0.0, h as f64, 1.0).unwrap(), f).unwrap()
    }

    #[test]
    fn assign_examples() {
        let spec = GridSpec {
            cell_across_m: 2.0,
            cell_along_m: 2.0,
            ..GridSpec::default()
        };
        let grid = build_grid(Rect::new(0.0, 0.0, 6.0, 4.0), &spec, 140.3).unwrap();
        let empty = assign_rates(&grid, &unit_mask(6, 4, |_, _| false)).unwrap();
        assert!(empty.cells.iter().all(|c| c.rate_l_per_ha == Some(0.0)));
        let full = assign_rates(&grid, &unit_mask(6, 4, |_, _| true)).unwrap();
        assert!(full.cells.iter().all(|c| c.rate_l_per_ha == Some(140.3) && c.weed_pixels == 4));
    }

    #[test]
    fn boundary_pixel_has_one_owner() {
        // pixel centers at integer + 0.5; a grid with 0.5 m cells puts them on boundaries
        let spec = GridSpec {
            cell_across_m: 0.5,
            cell_along_m: 0.5,
            ..GridSpec::default()
        };
        let grid = build_grid(Rect::new(0.0, 0.0, 2.0, 2.0), &spec, 140.3).unwrap();
        let map = assign_rates(&grid, &unit_mask(2, 2, |c, r| (c, r) == (0, 1))).unwrap();
        let sprayed: Vec<_> = map.cells.iter().filter(|c| c.weed_pixels > 0).map(|c| (c.row, c.col)).collect();
        // center (0.5, 0.5) belongs to [0.5, 1.0) x [0.5, 1.0)
        assert_eq!(sprayed, vec![(1, 1)]);
    }

    #[test]
    fn assign_rejects_foreign_mask() {
        let grid = build_grid(Rect::new(0.0, 0.0, 10.0, 10.0), &GridSpec::default(), 140.3).unwrap();
        assert!(matches!(assign_rates(&grid, &unit_mask(4, 4, |_, _| true)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn stats_examples() {
        let spec = GridSpec {
            cell_across_m: 1.0,
            cell_along_m: 1.0,
            ..GridSpec::default()
        };
        let grid = build_grid(Rect::new(0.0, 0.0, 10.0, 10.0), &spec, 140.3).unwrap();
        let all = assign_rates(&grid, &unit_mask(10, 10, |_, _| true)).unwrap();
        assert_eq!(prescription_stats(&all).unwrap().frac_no_spray, 0.0);
        // 35 weed-free cells out of 100
        let mixed = assign_rates(&grid, &unit_mask(10, 10, |c, r| r * 10 + c >= 35)).unwrap();
        let s = prescription_stats(&mixed).unwrap();
        assert_eq!((s.cells_total, s.cells_no_spray, s.cells_spray), (100, 35, 65));
        assert_eq!(s.frac_no_spray, 0.35);
        assert!(prescription_stats(&grid).is_err());
    }

    #[test]
    fn stats_areas_match_summation_on_truncated_grid() {
        let spec = GridSpec {
            cell_across_m: 0.7,
            cell_along_m: 1.3,
            origin: Some([-0.2, 0.1]),
            travel_axis: Axis::Y,
        };
        let grid = build_grid(Rect::new(0.0, 0.0, 9.0, 7.0), &spec, 140.3).unwrap();
        let map = assign_rates(&grid, &unit_mask(9, 7, |c, r| (c * 7 + r * 3) % 5 == 0)).unwrap();
        let s = prescription_stats(&map).unwrap();
        let (mut no, mut yes) = (0.0, 0.0);
        for c in &map.cells {
            let a = (c.rect.max_x - c.rect.min_x) * (c.rect.max_y - c.rect.min_y);
            if c.weed_pixels == 0 {
                no += a;
            } else {
                yes += a;
            }
        }
        assert_abs_diff_eq!(s.area_no_spray_m2, no, epsilon = 1e-12);
        assert_abs_diff_eq!(s.area_spray_m2, yes, epsilon = 1e-12);
        assert_abs_diff_eq!(s.area_no_spray_m2 + s.area_spray_m2, 63.0, epsilon = 1e-9);
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rx.geojson");
        let plot = GridSpec {
            travel_axis: Axis::Y,
            ..GridSpec::default()
        };
        let extent = Rect::new(0.0, 0.0, 41.64, 121.92);
        let grid = build_grid(extent, &plot, 140.3).unwrap();
        let geo = GeoTransform::north_up(0.0, 121.92, 0.12).unwrap();
        let weeds = BinaryMask::from_fn(347, 1016, geo, |c, r| (c * 13 + r * 7) % 97 == 0).unwrap();
        let map = assign_rates(&grid, &weeds).unwrap();
        export_prescription(&map, &path).unwrap();
        assert_eq!(import_prescription(&path).unwrap(), map);
        assert!(export_prescription(&grid, &path).is_err());
    }

    fn write_doc(path: &Path, mutate: impl FnOnce(&mut serde_json::Value)) {
        let grid = build_grid(Rect::new(0.0, 0.0, 2.0, 1.0), &GridSpec { cell_along_m: 1.0, cell_across_m: 1.0, ..GridSpec::default() }, 10.0).unwrap();
        let map = assign_rates(&grid, &unit_mask(2, 1, |c, _| c == 0)).unwrap();
        export_prescription(&map, path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        mutate(&mut v);
        std::fs::write(path, v.to_string()).unwrap();
    }

    #[test]
    fn import_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rx.geojson");
        write_doc(&path, |v| v["features"][0]["properties"]["rate_l_per_ha"] = (-5.0).into());
        let err = import_prescription(&path).unwrap_err();
        assert!(matches!(&err, Error::Parse { context, .. } if context.contains("feature 0")), "{err}");

        write_doc(&path, |v| v["features"] = serde_json::json!([]));
        assert!(matches!(import_prescription(&path), Err(Error::EmptyGrid(_))));

        write_doc(&path, |v| v["features"][1]["geometry"]["coordinates"][0][2] = serde_json::json!([5.0, 5.0]));
        assert!(import_prescription(&path).is_err());

        std::fs::write(&path, "{\"type\": \"FeatureCollection\",\n \"features\": [").unwrap();
        assert!(matches!(import_prescription(&path), Err(Error::Parse { context, .. }) if context.contains("line 2")));
    }

    /// Brute-force oracle: scan every weed pixel center against every cell rectangle.
    fn brute_force_counts(map: &PrescriptionMap, weeds: &BinaryMask) -> Vec<u64> {
        let geo = weeds.geo();
        map.cells
            .iter()
            .map(|cell| {
                weeds
                    .iter_ones()
                    .filter(|&(c, r)| {
                        let (x, y) = geo.pixel_to_world(c as f64, r as f64);
                        x >= cell.rect.min_x && x < cell.rect.max_x && y >= cell.rect.min_y && y < cell.rect.max_y
                    })
                    .count() as u64
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn rates_match_brute_force(
            w in 1usize..=64, h in 1usize..=64, gsd in 0.01f64..0.2,
            across in 0.05f64..2.0, along in 0.05f64..2.0, ox in -1.0f64..1.0, oy in -1.0f64..1.0,
            travel_y in any::<bool>(), seed in any::<u64>(),
        ) {
            let geo = GeoTransform::north_up(3.0, 7.0, gsd).unwrap();
            let mut state = seed | 1;
            let weeds = BinaryMask::from_fn(w, h, geo, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                state >> 60 == 0
            }).unwrap();
            let spec = GridSpec {
                cell_across_m: across,
                cell_along_m: along,
                origin: Some([3.0 + ox, 7.0 + oy]),
                travel_axis: if travel_y { Axis::Y } else { Axis::X },
            };
            let grid = build_grid(weeds.extent(), &spec, 140.3).unwrap();
            let map = assign_rates(&grid, &weeds).unwrap();
            let oracle = brute_force_counts(&map, &weeds);
            for (cell, n) in map.cells.iter().zip(oracle) {
                prop_assert_eq!(cell.weed_pixels, n);
                prop_assert_eq!(cell.rate_l_per_ha.unwrap() > 0.0, n >= 1);
            }
            let total: f64 = map.cells.iter().map(|c| c.rect.area()).sum();
            prop_assert!((total - map.extent.area()).abs() <= 1e-6 * map.extent.area());
            prop_assert_eq!(map.cells.iter().map(|c| c.weed_pixels).sum::<u64>(), weeds.count_ones());

            // adding weeds never switches a cell off
            let more = weeds.or(&BinaryMask::from_fn(w, h, geo, |c, r| (c + r) % 7 == 0).unwrap()).unwrap();
            let map2 = assign_rates(&grid, &more).unwrap();
            for (a, b) in map.cells.iter().zip(&map2.cells) {
                prop_assert!(!(a.rate_l_per_ha.unwrap() > 0.0 && b.rate_l_per_ha.unwrap() == 0.0));
            }
        }
    }
}
