//! Planar geometry shared by the grid, buffer and sprayer code.
//!
//! All coordinates are world meters. Rectangles are half-open:
//! `[min_x, max_x) x [min_y, max_y)`.

use serde::{Deserialize, Serialize};

/// Axis of travel (or of any axis-aligned direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.width() * self.height()
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.max_x > self.min_x && self.max_y > self.min_y)
    }

    /// Half-open containment.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x < self.max_x && y >= self.min_y && y < self.max_y
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.min_x.max(other.min_x),
            self.min_y.max(other.min_y),
            self.max_x.min(other.max_x),
            self.max_y.min(other.max_y),
        );
        (!r.is_empty()).then_some(r)
    }

    /// Extent along `axis` as `(min, max)`.
    pub fn span(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::X => (self.min_x, self.max_x),
            Axis::Y => (self.min_y, self.max_y),
        }
    }

    /// Builds a rectangle from an along-axis interval and an across-axis interval.
    pub fn from_spans(along_axis: Axis, along: (f64, f64), across: (f64, f64)) -> Rect {
        match along_axis {
            Axis::X => Rect::new(along.0, across.0, along.1, across.1),
            Axis::Y => Rect::new(across.0, along.0, across.1, along.1),
        }
    }

    /// Closed 5-point ring, counter-clockwise from the min corner.
    pub fn ring(&self) -> [[f64; 2]; 5] {
        [
            [self.min_x, self.min_y],
            [self.max_x, self.min_y],
            [self.max_x, self.max_y],
            [self.min_x, self.max_y],
            [self.min_x, self.min_y],
        ]
    }

    /// Recovers an axis-aligned rectangle from a closed ring, rejecting
    /// anything that is not a proper rectangle.
    pub fn from_ring(ring: &[[f64; 2]]) -> Result<Rect, String> {
        if ring.len() != 5 {
            return Err(format!("ring has {} points, expected 5", ring.len()));
        }
        if ring[0] != ring[4] {
            return Err("ring is not closed".into());
        }
        let xs = ring[..4].iter().map(|p| p[0]);
        let ys = ring[..4].iter().map(|p| p[1]);
        let min_x = xs.clone().fold(f64::INFINITY, f64::min);
        let max_x = xs.fold(f64::NEG_INFINITY, f64::max);
        let min_y = ys.clone().fold(f64::INFINITY, f64::min);
        let max_y = ys.fold(f64::NEG_INFINITY, f64::max);
        let rect = Rect::new(min_x, min_y, max_x, max_y);
        if rect.is_empty() || !rect.width().is_finite() || !rect.height().is_finite() {
            return Err("ring encloses no area".into());
        }
        // every vertex must be a corner and consecutive vertices must share an axis
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            let on_x = |v: f64| v == min_x || v == max_x;
            let on_y = |v: f64| v == min_y || v == max_y;
            if !(on_x(a[0]) && on_y(a[1])) {
                return Err(format!("vertex ({}, {}) is not a rectangle corner", a[0], a[1]));
            }
            if a[0] != b[0] && a[1] != b[1] {
                return Err("ring edge is not axis-aligned".into());
            }
            if a == b {
                return Err("ring has a repeated vertex".into());
            }
        }
        let mut corners: Vec<(u64, u64)> = ring[..4]
            .iter()
            .map(|p| (p[0].to_bits(), p[1].to_bits()))
            .collect();
        corners.sort_unstable();
        corners.dedup();
        if corners.len() != 4 {
            return Err("ring does not visit four distinct corners".into());
        }
        Ok(rect)
    }
}

/// Ceiling of `a / b` that ignores floating-point noise just above an integer.
pub(crate) fn ceil_div(a: f64, b: f64) -> usize {
    let q = a / b;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// Areas of two rectangle sets on a shared compressed lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionAreas {
    pub area_a: f64,
    pub area_b: f64,
    pub area_both: f64,
}

impl UnionAreas {
    pub fn symmetric_difference(&self) -> f64 {
        self.area_a + self.area_b - 2.0 * self.area_both
    }
}

/// Compressed coordinate lattice over a set of rectangles: every
/// elementary lattice cell is either fully inside or fully outside each
/// input rectangle, so region areas are exact sums of lattice cells.
#[derive(Debug, Clone)]
pub struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Lattice {
    pub fn new(layers: &[&[Rect]]) -> Self {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in layers.iter().flat_map(|l| l.iter()).filter(|r| !r.is_empty()) {
            xs.extend([r.min_x, r.max_x]);
            ys.extend([r.min_y, r.max_y]);
        }
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        Lattice { xs, ys }
    }

    fn dims(&self) -> (usize, usize) {
        (self.xs.len().saturating_sub(1), self.ys.len().saturating_sub(1))
    }

    /// Per elementary cell (row-major, `j * nx + i`): does any of `rects` cover it?
    /// Every rectangle must have been part of the lattice's layers.
    pub fn cover(&self, rects: &[Rect]) -> Vec<bool> {
        let (nx, ny) = self.dims();
        if nx == 0 || ny == 0 {
            return Vec::new();
        }
        // 2-D difference array over the lattice points
        let (px, py) = (nx + 1, ny + 1);
        let mut diff = vec![0i32; px * py];
        let idx = |v: &[f64], key: f64| v.partition_point(|&p| p < key);
        for r in rects.iter().filter(|r| !r.is_empty()) {
            let (x0, x1) = (idx(&self.xs, r.min_x), idx(&self.xs, r.max_x));
            let (y0, y1) = (idx(&self.ys, r.min_y), idx(&self.ys, r.max_y));
            diff[y0 * px + x0] += 1;
            diff[y0 * px + x1] -= 1;
            diff[y1 * px + x0] -= 1;
            diff[y1 * px + x1] += 1;
        }
        for j in 0..py {
            for i in 1..px {
                diff[j * px + i] += diff[j * px + i - 1];
            }
        }
        for j in 1..py {
            for i in 0..px {
                diff[j * px + i] += diff[(j - 1) * px + i];
            }
        }
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            out.extend((0..nx).map(|i| diff[j * px + i] > 0));
        }
        out
    }

    /// Area of the lattice cells selected by `keep`. Consecutive selected
    /// cells along `run_axis` are measured as one span, so a region that is
    /// one rectangle across that axis gets exactly `width * height`.
    pub fn area(&self, run_axis: Axis, keep: impl Fn(usize) -> bool) -> f64 {
        let (nx, ny) = self.dims();
        let (runs, lines, across, lines_across) = match run_axis {
            Axis::X => (nx, &self.xs, ny, &self.ys),
            Axis::Y => (ny, &self.ys, nx, &self.xs),
        };
        let cell = |along: usize, k: usize| match run_axis {
            Axis::X => k * nx + along,
            Axis::Y => along * nx + k,
        };
        let mut total = 0.0;
        for k in 0..across {
            let width = lines_across[k + 1] - lines_across[k];
            let mut start = None;
            for a in 0..=runs {
                let on = a < runs && keep(cell(a, k));
                match (on, start) {
                    (true, None) => start = Some(a),
                    (false, Some(s)) => {
                        total += width * (lines[a] - lines[s]);
                        start = None;
                    }
                    _ => {}
                }
            }
        }
        total
    }
}

/// Exact area of the union of `a`, the union of `b`, and their intersection.
pub fn union_areas(a: &[Rect], b: &[Rect]) -> UnionAreas {
    let lattice = Lattice::new(&[a, b]);
    let (cov_a, cov_b) = (lattice.cover(a), lattice.cover(b));
    UnionAreas {
        area_a: lattice.area(Axis::X, |c| cov_a[c]),
        area_b: lattice.area(Axis::X, |c| cov_b[c]),
        area_both: lattice.area(Axis::X, |c| cov_a[c] && cov_b[c]),
    }
}
