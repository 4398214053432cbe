//! Planar point patterns on rectangular windows, plus a cell-grid index for
//! fixed-radius neighbour queries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Closed axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidWindow(format!("[{x_min}, {x_max}] x [{y_min}, {y_max}]")));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    /// The square `[0, side]^2`.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, side, 0.0, side)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Minkowski erosion by a disc of radius `margin`, which for a rectangle
    /// shrinks every side by `margin`.
    pub fn erode(&self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::OutOfRange(format!("erosion margin {margin} < 0")));
        }
        if self.width() <= 2.0 * margin || self.height() <= 2.0 * margin {
            return Err(Error::EmptyErosion { margin });
        }
        Ok(Self {
            x_min: self.x_min + margin,
            x_max: self.x_max - margin,
            y_min: self.y_min + margin,
            y_max: self.y_max - margin,
        })
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self { x_min: self.x_min + dx, x_max: self.x_max + dx, y_min: self.y_min + dy, y_max: self.y_max + dy }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.x_max, self.y_min, self.y_max]
    }
}

/// A finite set of distinct points inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
}

impl PointPattern {
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !window.contains(p) {
                return Err(Error::PointOutsideWindow { x: p.x, y: p.y });
            }
            if !seen.insert((p.x.to_bits(), p.y.to_bits())) {
                return Err(Error::DuplicatePoint { x: p.x, y: p.y });
            }
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self { points: Vec::new(), window }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Smallest distance over distinct pairs. Plane sweep on x.
    pub fn min_interpoint_distance(&self) -> Result<f64> {
        if self.points.len() < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: self.points.len() });
        }
        let mut sorted = self.points.clone();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut best = f64::INFINITY;
        for i in 0..sorted.len() {
            for j in (i + 1)..sorted.len() {
                if sorted[j].x - sorted[i].x >= best {
                    break;
                }
                best = best.min(sorted[i].distance(&sorted[j]));
            }
        }
        Ok(best)
    }

    /// Points lying in the (closed) sub-window `w`, with their original ids.
    pub fn ids_inside(&self, w: &Window) -> Vec<usize> {
        self.points.iter().enumerate().filter(|(_, p)| w.contains(p)).map(|(i, _)| i).collect()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect(),
            window: self.window.translate(dx, dy),
        }
    }

    /// Multiply all coordinates (points and window) by `c > 0`.
    pub fn scale(&self, c: f64) -> Self {
        let w = &self.window;
        Self {
            points: self.points.iter().map(|p| Point::new(p.x * c, p.y * c)).collect(),
            window: Window { x_min: w.x_min * c, x_max: w.x_max * c, y_min: w.y_min * c, y_max: w.y_max * c },
        }
    }
}

/// Upper bound on grid cells per axis.
const MAX_CELLS_PER_AXIS: usize = 1024;

/// Uniform cell grid over a window, with cell side at least the query radius,
/// so a query only inspects the 3x3 block of cells around the query point.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point>,
    radius: f64,
    origin: Point,
    cell_w: f64,
    cell_h: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl NeighborIndex {
    pub fn new(pattern: &PointPattern, radius: f64) -> Self {
        Self::with_cell_size(pattern, radius, radius)
    }

    /// Build with a requested cell side (clamped below by `radius`).
    pub fn with_cell_size(pattern: &PointPattern, radius: f64, cell: f64) -> Self {
        let w = pattern.window();
        // Slack keeps pairs at exactly `radius` within adjacent cells under rounding.
        let side = cell.max(radius) * (1.0 + 1e-9);
        let count = |len: f64| -> usize {
            if side > 0.0 {
                ((len / side).floor() as usize).clamp(1, MAX_CELLS_PER_AXIS)
            } else {
                MAX_CELLS_PER_AXIS
            }
        };
        let nx = count(w.width());
        let ny = count(w.height());
        let mut idx = Self {
            points: pattern.points().to_vec(),
            radius,
            origin: Point::new(w.x_min, w.y_min),
            cell_w: w.width() / nx as f64,
            cell_h: w.height() / ny as f64,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (i, p) in pattern.points().iter().enumerate() {
            let (cx, cy) = idx.cell_of(p);
            let cx = cx.clamp(0, nx as i64 - 1) as usize;
            let cy = cy.clamp(0, ny as i64 - 1) as usize;
            idx.cells[cy * nx + cx].push(i as u32);
        }
        idx
    }

    fn cell_of(&self, p: &Point) -> (i64, i64) {
        (((p.x - self.origin.x) / self.cell_w).floor() as i64, ((p.y - self.origin.y) / self.cell_h).floor() as i64)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, id: usize) -> Point {
        self.points[id]
    }

    /// Visit every point `v` with `0 < |v - u|` and `r_lo <= |v - u| <= r_hi`.
    /// Caller guarantees `r_hi <= radius`.
    #[inline]
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, u: &Point, r_lo: f64, r_hi: f64, mut f: F) {
        let (cx, cy) = self.cell_of(u);
        let x0 = (cx - 1).max(0);
        let x1 = (cx + 1).min(self.nx as i64 - 1);
        let y0 = (cy - 1).max(0);
        let y1 = (cy + 1).min(self.ny as i64 - 1);
        // Points sitting exactly on the far window edge are clamped into the
        // last cell, which the +-1 block still reaches.
        for y in y0..=y1 {
            for x in x0..=x1 {
                for &id in &self.cells[y as usize * self.nx + x as usize] {
                    let id = id as usize;
                    let d = self.points[id].distance(u);
                    if d > 0.0 && d >= r_lo && d <= r_hi {
                        f(id, d);
                    }
                }
            }
        }
    }

    pub fn neighbors_within(&self, u: &Point, r_lo: f64, r_hi: f64) -> Result<Vec<(usize, f64)>> {
        if !(0.0 <= r_lo && r_lo <= r_hi) {
            return Err(Error::OutOfRange(format!("radii r_lo={r_lo}, r_hi={r_hi}")));
        }
        if r_hi > self.radius {
            return Err(Error::RadiusExceedsIndex { requested: r_hi, radius: self.radius });
        }
        let mut out = Vec::new();
        self.for_each_within(u, r_lo, r_hi, |id, d| out.push((id, d)));
        Ok(out)
    }
}
