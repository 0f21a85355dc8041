//! Raster data model, georeferencing, excess-green index and thresholding.
//!
//! Georeferencing follows the ESRI world-file convention: the origin is the
//! world position of the *center* of the upper-left pixel, and rows run
//! south (negative `pixel_size_y`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, ImageReader, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Axis-aligned affine pixel <-> world mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size_x: f64, pixel_size_y: f64) -> Result<Self> {
        if !(pixel_size_x > 0.0 && pixel_size_x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pixel_size_x must be positive, got {pixel_size_x}"
            )));
        }
        if !(pixel_size_y < 0.0 && pixel_size_y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pixel_size_y must be negative (north-up), got {pixel_size_y}"
            )));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::InvalidInput("origin must be finite".into()));
        }
        Ok(GeoTransform {
            origin_x,
            origin_y,
            pixel_size_x,
            pixel_size_y,
        })
    }

    /// North-up transform with square pixels of `gsd` meters whose upper-left
    /// pixel *corner* sits at `(left, top)`.
    pub fn north_up(left: f64, top: f64, gsd: f64) -> Result<Self> {
        GeoTransform::new(left + gsd / 2.0, top - gsd / 2.0, gsd, -gsd)
    }

    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + col * self.pixel_size_x,
            self.origin_y + row * self.pixel_size_y,
        )
    }

    /// Continuous inverse of [`pixel_to_world`](Self::pixel_to_world).
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.pixel_size_x,
            (y - self.origin_y) / self.pixel_size_y,
        )
    }

    /// Index of the pixel whose footprint contains `(x, y)`.
    pub fn pixel_index(&self, x: f64, y: f64, width: usize, height: usize) -> Result<(usize, usize)> {
        let (c, r) = self.world_to_pixel(x, y);
        let (c, r) = ((c + 0.5).floor(), (r + 0.5).floor());
        if c < 0.0 || r < 0.0 || c >= width as f64 || r >= height as f64 || c.is_nan() || r.is_nan() {
            return Err(Error::OutOfBounds { x, y });
        }
        Ok((c as usize, r as usize))
    }

    pub fn gsd_x(&self) -> f64 {
        self.pixel_size_x
    }

    pub fn gsd_y(&self) -> f64 {
        self.pixel_size_y.abs()
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size_x * self.pixel_size_y.abs()
    }

    /// World extent covered by the pixel footprints of a `width x height` grid.
    pub fn extent(&self, width: usize, height: usize) -> Rect {
        let (left, top) = self.pixel_to_world(-0.5, -0.5);
        let (right, bottom) = self.pixel_to_world(width as f64 - 0.5, height as f64 - 0.5);
        Rect::new(left, bottom, right, top)
    }

    /// Parses the six lines of a world file.
    pub fn from_world_file_str(text: &str) -> std::result::Result<Self, String> {
        let values: Vec<f64> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|e| format!("line {}: {e} ({l:?})", i + 1))
            })
            .collect::<std::result::Result<_, _>>()?;
        if values.len() != 6 {
            return Err(format!("expected 6 values, found {}", values.len()));
        }
        if values[1] != 0.0 || values[2] != 0.0 {
            return Err("rotated world files are not supported".into());
        }
        GeoTransform::new(values[4], values[5], values[0], values[3]).map_err(|e| e.to_string())
    }

    pub fn to_world_file_string(&self) -> String {
        format!(
            "{}\n0\n0\n{}\n{}\n{}\n",
            self.pixel_size_x, self.pixel_size_y, self.origin_x, self.origin_y
        )
    }
}

/// Multi-band 8-bit raster (1 or 3 bands, interleaved).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub samples: Vec<u8>,
    pub geo: GeoTransform,
}

impl Raster {
    pub fn new(width: usize, height: usize, bands: usize, samples: Vec<u8>, geo: GeoTransform) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("raster dimensions must be positive".into()));
        }
        if bands != 1 && bands != 3 {
            return Err(Error::InvalidInput(format!("unsupported band count {bands}")));
        }
        if samples.len() != width * height * bands {
            return Err(Error::InvalidInput(format!(
                "sample count {} does not match {width}x{height}x{bands}",
                samples.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            bands,
            samples,
            geo,
        })
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[u8] {
        let i = (row * self.width + col) * self.bands;
        &self.samples[i..i + self.bands]
    }

    pub fn extent(&self) -> Rect {
        self.geo.extent(self.width, self.height)
    }
}

/// Real-valued single-band layer such as the excess-green index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub geo: GeoTransform,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f32>, geo: GeoTransform) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "field of {} values cannot be {width}x{height}",
                values.len()
            )));
        }
        Ok(ScalarField {
            width,
            height,
            values,
            geo,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.width + col]
    }
}

/// One bit per pixel, rows padded to whole 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    geo: GeoTransformBits,
}

// f64 fields compared bitwise so masks can be Eq
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GeoTransformBits([u64; 4]);

impl From<GeoTransform> for GeoTransformBits {
    fn from(g: GeoTransform) -> Self {
        GeoTransformBits([
            g.origin_x.to_bits(),
            g.origin_y.to_bits(),
            g.pixel_size_x.to_bits(),
            g.pixel_size_y.to_bits(),
        ])
    }
}

impl From<GeoTransformBits> for GeoTransform {
    fn from(g: GeoTransformBits) -> Self {
        GeoTransform {
            origin_x: f64::from_bits(g.0[0]),
            origin_y: f64::from_bits(g.0[1]),
            pixel_size_x: f64::from_bits(g.0[2]),
            pixel_size_y: f64::from_bits(g.0[3]),
        }
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, geo: GeoTransform) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("mask dimensions must be positive".into()));
        }
        let words_per_row = width.div_ceil(64);
        Ok(BinaryMask {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height],
            geo: geo.into(),
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        geo: GeoTransform,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut mask = BinaryMask::new(width, height, geo)?;
        for row in 0..height {
            for col in 0..width {
                if f(col, row) {
                    mask.set(col, row, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn geo(&self) -> GeoTransform {
        self.geo.into()
    }

    pub fn extent(&self) -> Rect {
        self.geo().extent(self.width, self.height)
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        let w = self.bits[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        let w = &mut self.bits[row * self.words_per_row + col / 64];
        if value {
            *w |= 1 << (col % 64);
        } else {
            *w &= !(1 << (col % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Set bits in `row` over columns `[col_start, col_end)`.
    pub fn count_ones_in_row(&self, row: usize, col_start: usize, col_end: usize) -> u32 {
        let col_end = col_end.min(self.width);
        if col_start >= col_end {
            return 0;
        }
        let words = &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row];
        let (w0, w1) = (col_start / 64, (col_end - 1) / 64);
        let lo_mask = !0u64 << (col_start % 64);
        let hi_mask = !0u64 >> (63 - (col_end - 1) % 64);
        if w0 == w1 {
            return (words[w0] & lo_mask & hi_mask).count_ones();
        }
        let mut n = (words[w0] & lo_mask).count_ones() + (words[w1] & hi_mask).count_ones();
        for w in &words[w0 + 1..w1] {
            n += w.count_ones();
        }
        n
    }

    /// Set pixels as `(col, row)` in raster order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let wpr = self.words_per_row;
        self.bits.iter().enumerate().flat_map(move |(i, &word)| {
            let row = i / wpr;
            let base = (i % wpr) * 64;
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some((base + bit, row))
            })
        })
    }

    /// True when both masks share dimensions and georeferencing.
    pub fn same_grid(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height && self.geo == other.geo
    }

    fn check_grid(&self, other: &BinaryMask) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::InvalidInput(format!(
                "mask grids differ: {}x{} vs {}x{} (or georeferencing mismatch)",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// `self AND NOT other`.
    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
        Ok(out)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
        Ok(out)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }
}

/// Excess-green index of one RGB triple, `2g - r - b` on chromatic coordinates.
///
/// A black pixel (`R + G + B = 0`) maps to 0.
pub fn exgi_value(r: f64, g: f64, b: f64) -> f64 {
    let s = r + g + b;
    if s > 0.0 {
        2.0 * (g / s) - r / s - b / s
    } else {
        0.0
    }
}

pub fn compute_exgi(rgb: &Raster) -> Result<ScalarField> {
    if rgb.bands != 3 {
        return Err(Error::InvalidInput(format!(
            "excess-green index needs a 3-band raster, got {} band(s)",
            rgb.bands
        )));
    }
    let values = rgb
        .samples
        .chunks_exact(3)
        .map(|p| exgi_value(f64::from(p[0]), f64::from(p[1]), f64::from(p[2])) as f32)
        .collect();
    ScalarField::new(rgb.width, rgb.height, values, rgb.geo)
}

/// Vegetation mask: a pixel is set iff its value is at least `threshold`.
pub fn threshold_mask(field: &ScalarField, threshold: f64) -> BinaryMask {
    // compared in the field's own precision so a stored value equal to t ties
    let t = threshold as f32;
    let mut mask = BinaryMask::new(field.width, field.height, field.geo)
        .expect("field dimensions are validated on construction");
    for (row, line) in field.values.chunks_exact(field.width).enumerate() {
        for (col, &v) in line.iter().enumerate() {
            if v >= t {
                mask.set(col, row, true);
            }
        }
    }
    mask
}

/// Path of the world file that accompanies a PNG.
pub fn world_file_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("pgw")
}

pub fn read_world_file(image_path: &Path) -> Result<GeoTransform> {
    let wf = world_file_path(image_path);
    let text = fs::read_to_string(&wf).map_err(|e| Error::Georeference {
        path: wf.clone(),
        reason: format!("cannot read world file: {e}"),
    })?;
    GeoTransform::from_world_file_str(&text).map_err(|reason| Error::Georeference { path: wf, reason })
}

pub fn write_world_file(image_path: &Path, geo: &GeoTransform) -> Result<()> {
    let wf = world_file_path(image_path);
    fs::write(&wf, geo.to_world_file_string()).map_err(|e| Error::io(wf, e))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn encode_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Loads a PNG (gray or RGB; alpha is dropped) and its world file.
pub fn load_raster(path: &Path) -> Result<Raster> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let geo = read_world_file(path)?;
    let img = decode(path)?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (bands, samples) = match img {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        other => (3, other.into_rgb8().into_raw()),
    };
    Raster::new(width, height, bands, samples, geo)
}

pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    let (w, h) = (raster.width as u32, raster.height as u32);
    let result = if raster.bands == 3 {
        RgbImage::from_raw(w, h, raster.samples.clone())
            .expect("sample count validated")
            .save(path)
    } else {
        GrayImage::from_raw(w, h, raster.samples.clone())
            .expect("sample count validated")
            .save(path)
    };
    result.map_err(|e| encode_err(path, e))?;
    write_world_file(path, &raster.geo)
}

/// Writes a mask as an 8-bit PNG (0 / 255) plus world file.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let mut img = GrayImage::new(mask.width() as u32, mask.height() as u32);
    for (col, row) in mask.iter_ones() {
        img.put_pixel(col as u32, row as u32, Luma([255]));
    }
    img.save(path).map_err(|e| encode_err(path, e))?;
    write_world_file(path, &mask.geo())
}

/// Reads a mask written by [`save_mask`]; any nonzero sample is set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let raster = load_raster(path)?;
    if raster.bands != 1 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: format!("mask must be single-band, found {} bands", raster.bands),
        });
    }
    let mut mask = BinaryMask::new(raster.width, raster.height, raster.geo)?;
    for (i, &v) in raster.samples.iter().enumerate() {
        if v != 0 {
            mask.set(i % raster.width, i / raster.width, true);
        }
    }
    Ok(mask)
}

/// Path of the `[min, max]` sidecar that accompanies a saved field.
pub fn range_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("range")
}

/// Writes a field as a 16-bit PNG rescaled over `[min, max]`; the range goes
/// to a `.range` sidecar.
pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    let (min, max) = field
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = f64::from(max) - f64::from(min);
    let raw: Vec<u16> = field
        .values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((f64::from(v) - f64::from(min)) / span * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(field.width as u32, field.height as u32, raw).expect("length validated");
    img.save(path).map_err(|e| encode_err(path, e))?;
    let sidecar = range_sidecar_path(path);
    let mut f = fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    writeln!(f, "min={min}\nmax={max}").map_err(|e| Error::io(&sidecar, e))?;
    write_world_file(path, &field.geo)
}

/// Reads a field written by [`save_field`] (quantized to 1/65535 of its range).
pub fn load_field(path: &Path) -> Result<ScalarField> {
    let geo = read_world_file(path)?;
    let sidecar = range_sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut min = None;
    let mut max = None;
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let v: f32 = v
            .trim()
            .parse()
            .map_err(|e| Error::parse(sidecar.display().to_string(), e))?;
        match k.trim() {
            "min" => min = Some(v),
            "max" => max = Some(v),
            _ => {}
        }
    }
    let (Some(min), Some(max)) = (min, max) else {
        return Err(Error::parse(sidecar.display().to_string(), "missing min/max"));
    };
    let img = decode(path)?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let span = f64::from(max) - f64::from(min);
    let values = img
        .into_raw()
        .into_iter()
        .map(|q| (f64::from(min) + f64::from(q) / 65535.0 * span) as f32)
        .collect();
    ScalarField::new(w, h, values, geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geo() -> GeoTransform {
        GeoTransform::new(100.0, 500.0, 0.0063, -0.0063).unwrap()
    }

    fn one_pixel(r: u8, g: u8, b: u8) -> Raster {
        Raster::new(1, 1, 3, vec![r, g, b], geo()).unwrap()
    }

    #[test]
    fn exgi_examples() {
        let v = |r, g, b| compute_exgi(&one_pixel(r, g, b)).unwrap().values[0];
        assert_eq!(v(0, 255, 0), 2.0);
        assert_eq!(v(100, 100, 100), 0.0);
        assert_eq!(v(0, 0, 0), 0.0);
        assert_abs_diff_eq!(f64::from(v(50, 150, 55)), 3.0 * (150.0 / 255.0) - 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(f64::from(v(50, 150, 55)), 0.764_705_88, epsilon = 1e-7);
    }

    #[test]
    fn exgi_rejects_single_band() {
        let r = Raster::new(2, 1, 1, vec![0, 1], geo()).unwrap();
        assert!(matches!(compute_exgi(&r), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn threshold_examples() {
        let f = ScalarField::new(3, 2, vec![0.08; 6], geo()).unwrap();
        assert_eq!(threshold_mask(&f, 0.08).count_ones(), 6);
        let f = ScalarField::new(3, 2, vec![-1.0; 6], geo()).unwrap();
        assert_eq!(threshold_mask(&f, 0.08).count_ones(), 0);
        let f = ScalarField::new(2, 1, vec![0.05, 0.20], geo()).unwrap();
        let m = threshold_mask(&f, 0.08);
        assert!(!m.get(0, 0) && m.get(1, 0));
    }

    #[test]
    fn geo_examples() {
        let g = geo();
        assert_eq!(g.pixel_to_world(0.0, 0.0), (100.0, 500.0));
        let (x, y) = g.pixel_to_world(100.0, 200.0);
        assert_abs_diff_eq!(x, 100.63, epsilon = 1e-9);
        assert_abs_diff_eq!(y, 498.74, epsilon = 1e-9);
        let (c, r) = g.world_to_pixel(100.63, 498.74);
        let (x2, y2) = g.pixel_to_world(c, r);
        assert_abs_diff_eq!(x2, 100.63, epsilon = 1e-9);
        assert_abs_diff_eq!(y2, 498.74, epsilon = 1e-9);
    }

    #[test]
    fn pixel_index_bounds() {
        let g = geo();
        assert_eq!(g.pixel_index(100.0, 500.0, 10, 10).unwrap(), (0, 0));
        assert!(matches!(g.pixel_index(99.0, 500.0, 10, 10), Err(Error::OutOfBounds { .. })));
        assert!(g.pixel_index(100.0 + 10.0 * 0.0063, 500.0, 10, 10).is_err());
    }

    #[test]
    fn geo_validation() {
        assert!(GeoTransform::new(0.0, 0.0, 0.0, -1.0).is_err());
        assert!(GeoTransform::new(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn world_file_parse_errors() {
        assert!(GeoTransform::from_world_file_str("1\n0\n0\n-1\n0").is_err());
        assert!(GeoTransform::from_world_file_str("1\n0.1\n0\n-1\n0\n0").is_err());
        assert!(GeoTransform::from_world_file_str("1\n0\n0\nabc\n0\n0").is_err());
    }

    #[test]
    fn row_popcount_ranges() {
        let mut m = BinaryMask::new(200, 2, geo()).unwrap();
        for c in (0..200).step_by(3) {
            m.set(c, 1, true);
        }
        for (a, b) in [(0, 200), (5, 70), (63, 65), (64, 128), (130, 131), (10, 10)] {
            let brute = (a..b).filter(|&c| m.get(c, 1)).count() as u32;
            assert_eq!(m.count_ones_in_row(1, a, b), brute, "range {a}..{b}");
        }
        assert_eq!(m.count_ones_in_row(0, 0, 200), 0);
        assert_eq!(m.iter_ones().count() as u64, m.count_ones());
    }

    #[test]
    fn mask_ops_check_grid() {
        let a = BinaryMask::new(4, 4, geo()).unwrap();
        let b = BinaryMask::new(4, 5, geo()).unwrap();
        assert!(a.and_not(&b).is_err());
    }

    proptest! {
        #[test]
        fn exgi_scale_invariant_and_bounded(
            r in 0.0f64..1e4, g in 0.0f64..1e4, b in 0.0f64..1e4, k in 1e-3f64..1e3
        ) {
            prop_assume!(r + g + b > 0.0);
            let v = exgi_value(r, g, b);
            prop_assert!((-1.0..=2.0).contains(&v));
            prop_assert!((exgi_value(k * r, k * g, k * b) - v).abs() <= 1e-12);
        }

        #[test]
        fn threshold_is_monotone(vals in prop::collection::vec(-1.0f32..2.0, 1..64), t1 in -1.0f64..2.0, dt in 0.0f64..1.0) {
            let f = ScalarField::new(vals.len(), 1, vals, geo()).unwrap();
            let lo = threshold_mask(&f, t1);
            let hi = threshold_mask(&f, t1 + dt);
            prop_assert!(hi.and_not(&lo).unwrap().is_empty());
        }

        #[test]
        fn geo_round_trip(col in 0u32..100_000, row in 0u32..100_000) {
            let g = geo();
            let (x, y) = g.pixel_to_world(f64::from(col), f64::from(row));
            let (c, r) = g.world_to_pixel(x, y);
            prop_assert!((c - f64::from(col)).abs() < 1e-6 && (r - f64::from(row)).abs() < 1e-6);
            prop_assert_eq!((c.round() as u32, r.round() as u32), (col, row));
        }
    }
}
