//! Review overlays: no-spray cells tinted blue, weed pixels magenta and
//! row lines red, drawn in that order over the source raster.

use rowcrop::prescription::PrescriptionMap;
use rowcrop::rowdetect::RowLine;
use rowcrop::{BinaryMask, Error, Raster, Result};

pub const ROW_COLOR: [u8; 3] = [255, 0, 0];
pub const WEED_COLOR: [u8; 3] = [255, 0, 255];
pub const NO_SPRAY_TINT: [u8; 3] = [0, 0, 255];

#[derive(Debug, Default, Clone, Copy)]
pub struct Layers<'a> {
    pub lines: Option<&'a [RowLine]>,
    pub weeds: Option<&'a BinaryMask>,
    pub prescription: Option<&'a PrescriptionMap>,
}

fn to_rgb(raster: &Raster) -> Vec<u8> {
    match raster.bands {
        3 => raster.samples.clone(),
        _ => raster.samples.iter().flat_map(|&v| [v, v, v]).collect(),
    }
}

/// Pixels visited by a line from one endpoint to the other, stepping one
/// pixel along the longer axis and rounding to the nearest pixel center.
pub fn line_pixels(line: &RowLine, raster: &Raster) -> Vec<(usize, usize)> {
    let (c0, r0) = raster.geo.world_to_pixel(line.x1, line.y1);
    let (c1, r1) = raster.geo.world_to_pixel(line.x2, line.y2);
    let steps = (c1 - c0).abs().max((r1 - r0).abs()).round().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
        let (c, r) = ((c0 + t * (c1 - c0)).round(), (r0 + t * (r1 - r0)).round());
        if c >= 0.0 && r >= 0.0 && (c as usize) < raster.width && (r as usize) < raster.height {
            let p = (c as usize, r as usize);
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
    }
    out
}

fn check_layers(raster: &Raster, layers: &Layers) -> Result<()> {
    let extent = raster.extent();
    if let Some(weeds) = layers.weeds {
        let grid = BinaryMask::new(raster.width, raster.height, raster.geo)?;
        if !grid.same_grid(weeds) {
            return Err(Error::InvalidInput("weed mask grid differs from the raster grid".into()));
        }
    }
    if let Some(map) = layers.prescription {
        let tol = 1e-6 * (1.0 + extent.width().max(extent.height()));
        let e = map.extent;
        let off = [
            e.min_x - extent.min_x,
            e.min_y - extent.min_y,
            e.max_x - extent.max_x,
            e.max_y - extent.max_y,
        ];
        if off.iter().any(|d| d.abs() > tol) {
            return Err(Error::InvalidInput(format!(
                "prescription extent {e:?} differs from the raster extent {extent:?}"
            )));
        }
    }
    if let Some(lines) = layers.lines {
        let pad = raster.geo.gsd_x().max(raster.geo.gsd_y());
        for l in lines {
            for (x, y) in [(l.x1, l.y1), (l.x2, l.y2)] {
                let inside = x >= extent.min_x - pad && x <= extent.max_x + pad && y >= extent.min_y - pad && y <= extent.max_y + pad;
                if !inside {
                    return Err(Error::InvalidInput(format!(
                        "row line endpoint ({x}, {y}) lies outside the raster extent"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// RGB overlay of the given layers; with no layers this is the input
/// (gray inputs are expanded to RGB).
pub fn render_overlay(raster: &Raster, layers: &Layers) -> Result<Raster> {
    check_layers(raster, layers)?;
    let mut rgb = to_rgb(raster);
    let w = raster.width;
    let paint = |rgb: &mut Vec<u8>, c: usize, r: usize, color: [u8; 3]| {
        let i = 3 * (r * w + c);
        rgb[i..i + 3].copy_from_slice(&color);
    };
    if let Some(map) = layers.prescription {
        for r in 0..raster.height {
            for c in 0..w {
                let (x, y) = raster.geo.pixel_to_world(c as f64, r as f64);
                let off = map.cell_at(x, y).is_some_and(|cell| cell.rate_l_per_ha == Some(0.0));
                if off {
                    let i = 3 * (r * w + c);
                    for (v, t) in rgb[i..i + 3].iter_mut().zip(NO_SPRAY_TINT) {
                        *v = ((u16::from(*v) + u16::from(t)) / 2) as u8;
                    }
                }
            }
        }
    }
    if let Some(weeds) = layers.weeds {
        for (c, r) in weeds.iter_ones() {
            paint(&mut rgb, c, r, WEED_COLOR);
        }
    }
    if let Some(lines) = layers.lines {
        for line in lines {
            for (c, r) in line_pixels(line, raster) {
                paint(&mut rgb, c, r, ROW_COLOR);
            }
        }
    }
    Raster::new(raster.width, raster.height, 3, rgb, raster.geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rowcrop::GeoTransform;

    fn gray_field() -> Raster {
        let geo = GeoTransform::north_up(0.0, 10.0, 1.0).unwrap();
        let samples = (0..100 * 3).map(|i| (i % 251) as u8).collect();
        Raster::new(10, 10, 3, samples, geo).unwrap()
    }

    #[test]
    fn no_layers_is_a_copy() {
        let r = gray_field();
        assert_eq!(render_overlay(&r, &Layers::default()).unwrap(), r);
    }

    #[test]
    fn one_line_recolors_exactly_its_pixels() {
        let r = gray_field();
        let line = RowLine::horizontal(2.5, 7.5, 6.5);
        let lines = [line];
        let out = render_overlay(&r, &Layers { lines: Some(&lines), ..Layers::default() }).unwrap();
        for row in 0..10 {
            for col in 0..10 {
                let i = 3 * (row * 10 + col);
                let on_line = row == 3 && (2..=7).contains(&col);
                if on_line {
                    assert_eq!(out.samples[i..i + 3], ROW_COLOR);
                } else {
                    assert_eq!(out.samples[i..i + 3], r.samples[i..i + 3]);
                }
            }
        }
    }

    #[test]
    fn mismatched_layers_are_rejected() {
        let r = gray_field();
        let other = BinaryMask::new(9, 10, r.geo).unwrap();
        assert!(render_overlay(&r, &Layers { weeds: Some(&other), ..Layers::default() }).is_err());
        let far = [RowLine::horizontal(50.0, 60.0, 5.0)];
        assert!(render_overlay(&r, &Layers { lines: Some(&far), ..Layers::default() }).is_err());
    }
}
