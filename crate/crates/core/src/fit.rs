//! Truncated log-pseudolikelihood
//!
//! ```text
//! LPL(theta) = sum_{u in X ∩ W-} theta' S(u, X \ u) - int_{W-} exp(theta' S(u, X)) du
//! ```
//!
//! with `S = (1, S_1, .., S_K)` and `W- = W ⊖ (R + delta)` (border
//! correction). The integral is a Riemann sum over a regular `nd x nd` grid of
//! cell-centre dummy nodes covering `W-`. Statistics always see the full
//! pattern on `W`, so points in the border strip still act as neighbours.
//! Dummy nodes with a data point strictly inside the hard core have zero
//! intensity and are dropped from the integral.
//!
//! The objective is concave; it is maximised by Newton's method with step
//! halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, K_MAX};
use crate::error::{Error, Result};
use crate::gibbs::{suff_stats_into, violates_hard_core};
use crate::pattern::{NeighborIndex, Point, PointPattern, Window};

/// Minimum dummy nodes per observed point.
pub const DUMMY_PER_POINT: usize = 64;
/// Minimum dummy grid side.
pub const MIN_GRID_SIDE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub nd: usize,
    pub dummy_count: usize,
    pub blocked_dummies: usize,
    /// Weight of every dummy node, `|W-| / nd^2`.
    pub node_weight: f64,
    /// `|W-|`.
    pub area: f64,
    pub eroded: Window,
    pub n_data: usize,
}

impl QuadratureScheme {
    /// Sum of dummy weights (blocked ones included), `|W-|` up to rounding.
    pub fn total_weight(&self) -> f64 {
        self.node_weight * self.dummy_count as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub location: Point,
    /// `(1, S_1, .., S_Kmax)`.
    pub s: Vec<f64>,
    pub is_data: bool,
    /// Quadrature weight; zero for data rows.
    pub weight: f64,
    pub hardcore_blocked: bool,
    /// Index of the data point in the pattern.
    pub point_id: Option<usize>,
}

/// Rows for the data points in `W-` followed by the dummy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub scheme: QuadratureScheme,
    pub k_max: usize,
    pub delta: f64,
    pub range: f64,
    pub rows: Vec<DesignRow>,
}

/// `ceil(sqrt(max(64 n, 128^2)))`.
pub fn default_grid_side(n_points: usize) -> usize {
    let target = (DUMMY_PER_POINT * n_points).max(MIN_GRID_SIDE * MIN_GRID_SIDE);
    (target as f64).sqrt().ceil() as usize
}

/// Build the quadrature design for truncation levels up to `k_max`.
pub fn build_quadrature(
    pattern: &PointPattern,
    basis: &BasisSystem,
    delta: f64,
    nd: Option<usize>,
    k_max: usize,
) -> Result<Design> {
    if k_max > K_MAX {
        return Err(Error::OutOfRange(format!("k_max {k_max} exceeds {K_MAX}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::OutOfRange(format!("delta {delta} < 0")));
    }
    let nd = nd.unwrap_or_else(|| default_grid_side(pattern.len()));
    if nd < 8 {
        return Err(Error::InvalidConfig(format!("grid side {nd} < 8")));
    }
    let range = basis.range();
    let reach = delta + range;
    let eroded = pattern.window().erode(reach)?;
    let area = eroded.area();
    let index = NeighborIndex::new(pattern, reach);
    let width = eroded.width() / nd as f64;
    let height = eroded.height() / nd as f64;
    let node_weight = area / (nd * nd) as f64;

    let make_row = |location: Point, point_id: Option<usize>| -> DesignRow {
        let mut s = vec![0.0; k_max + 1];
        s[0] = 1.0;
        suff_stats_into(basis, delta, &location, &index, point_id, &mut s[1..]);
        DesignRow {
            location,
            s,
            is_data: point_id.is_some(),
            weight: if point_id.is_some() { 0.0 } else { node_weight },
            hardcore_blocked: violates_hard_core(&location, &index, delta, point_id),
            point_id,
        }
    };

    let data_ids = pattern.ids_inside(&eroded);
    let n_data = data_ids.len();
    let nodes: Vec<Point> = (0..nd * nd)
        .map(|i| {
            let (ix, iy) = (i % nd, i / nd);
            Point::new(eroded.x_min + (ix as f64 + 0.5) * width, eroded.y_min + (iy as f64 + 0.5) * height)
        })
        .collect();

    #[cfg(feature = "parallel")]
    let (data_rows, dummy_rows): (Vec<DesignRow>, Vec<DesignRow>) = {
        use rayon::prelude::*;
        (
            data_ids.par_iter().map(|&id| make_row(pattern.points()[id], Some(id))).collect(),
            nodes.par_iter().map(|&p| make_row(p, None)).collect(),
        )
    };
    #[cfg(not(feature = "parallel"))]
    let (data_rows, dummy_rows): (Vec<DesignRow>, Vec<DesignRow>) = (
        data_ids.iter().map(|&id| make_row(pattern.points()[id], Some(id))).collect(),
        nodes.iter().map(|&p| make_row(p, None)).collect(),
    );

    let blocked_dummies = dummy_rows.iter().filter(|r| r.hardcore_blocked).count();
    let mut rows = data_rows;
    rows.extend(dummy_rows);
    Ok(Design {
        scheme: QuadratureScheme { nd, dummy_count: nd * nd, blocked_dummies, node_weight, area, eroded, n_data },
        k_max,
        delta,
        range,
        rows,
    })
}

impl Design {
    pub fn data_rows(&self) -> impl Iterator<Item = &DesignRow> {
        self.rows.iter().filter(|r| r.is_data)
    }

    pub fn dummy_rows(&self) -> impl Iterator<Item = &DesignRow> {
        self.rows.iter().filter(|r| !r.is_data)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<usize> {
        if theta.is_empty() || theta.len() > self.k_max + 1 {
            return Err(Error::DimensionMismatch { expected: self.k_max + 1, got: theta.len() });
        }
        Ok(theta.len())
    }

    fn data_blocked(&self) -> bool {
        self.data_rows().any(|r| r.hardcore_blocked)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows are summed in chunks to limit rounding growth on large designs.
const CHUNK: usize = 512;

/// Truncated LPL at `theta = (theta_0, .., theta_K)`, `K <= k_max`. Returns
/// `-inf` when a data point violates the hard core.
pub fn lpl_value(design: &Design, theta: &[f64]) -> Result<f64> {
    let dim = design.check_theta(theta)?;
    if design.data_blocked() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = 0.0;
    for chunk in design.rows.chunks(CHUNK) {
        let mut acc = 0.0;
        for row in chunk {
            let eta = dot(theta, &row.s[..dim]);
            if row.is_data {
                acc += eta;
            } else if !row.hardcore_blocked {
                acc -= row.weight * eta.exp();
            }
        }
        total += acc;
    }
    Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
}

/// Score `e(theta)` and Hessian `-A(theta)` of the truncated LPL.
pub fn score_and_hessian(design: &Design, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = design.check_theta(theta)?;
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    let mut g = vec![0.0; dim];
    let mut h = vec![0.0; dim * dim];
    for chunk in design.rows.chunks(CHUNK) {
        g.iter_mut().for_each(|v| *v = 0.0);
        h.iter_mut().for_each(|v| *v = 0.0);
        for row in chunk {
            let s = &row.s[..dim];
            if row.is_data {
                for (gi, si) in g.iter_mut().zip(s) {
                    *gi += si;
                }
            } else if !row.hardcore_blocked {
                let lam = row.weight * dot(theta, s).exp();
                for i in 0..dim {
                    let ls = lam * s[i];
                    g[i] -= ls;
                    for j in 0..=i {
                        h[i * dim + j] -= ls * s[j];
                    }
                }
            }
        }
        for i in 0..dim {
            grad[i] += g[i];
            for j in 0..=i {
                hess[(i, j)] += h[i * dim + j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            hess[(j, i)] = hess[(i, j)];
        }
    }
    Ok((grad, hess))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on `sup |score| / |W-|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "K")]
    pub k: usize,
    /// `(theta_0, theta_1, .., theta_K)`.
    pub theta: Vec<f64>,
    pub lpl: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `sup |score| / |W-|` at `theta`.
    pub gradient_norm: f64,
    pub quadrature: QuadratureScheme,
}

impl FitResult {
    pub fn log_activity(&self) -> f64 {
        self.theta[0]
    }

    /// Series coefficients `theta_1..theta_K`.
    pub fn coefficients(&self) -> &[f64] {
        &self.theta[1..]
    }
}

/// Solve `m x = b` for symmetric positive semidefinite `m`, adding a ridge
/// of `1e-10 * trace / dim` (growing tenfold) when Cholesky fails.
fn solve_psd(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(b));
    }
    let dim = m.nrows();
    let mut ridge = 1e-10 * m.trace().abs().max(f64::MIN_POSITIVE) / dim as f64;
    for _ in 0..12 {
        let mut mm = m.clone();
        for i in 0..dim {
            mm[(i, i)] += ridge;
        }
        if let Some(ch) = mm.cholesky() {
            return Some(ch.solve(b));
        }
        ridge *= 10.0;
    }
    None
}

/// Maximise the truncated LPL over `(theta_0, .., theta_K)`.
///
/// Starts from the Poisson optimum `(log(n / |W-|), 0, .., 0)`. If the
/// iteration cap is hit the best iterate is returned with
/// `converged = false`.
pub fn fit_lpl(design: &Design, k: usize, opts: &FitOptions) -> Result<FitResult> {
    if k > design.k_max {
        return Err(Error::DimensionMismatch { expected: design.k_max + 1, got: k + 1 });
    }
    let n = design.scheme.n_data;
    if n == 0 {
        return Err(Error::NoDataPoints);
    }
    if design.data_blocked() {
        return Err(Error::InvalidModel("a data pair is closer than the hard core".into()));
    }
    let area = design.scheme.area;
    let mut theta = vec![0.0; k + 1];
    theta[0] = (n as f64 / area).ln();
    let mut value = lpl_value(design, &theta)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut gnorm;
    loop {
        let (grad, hess) = score_and_hessian(design, &theta)?;
        gnorm = grad.amax() / area;
        if gnorm < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let Some(step) = solve_psd(&(-hess), &grad) else {
            break;
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let v = lpl_value(design, &cand)?;
            if v.is_finite() && v >= value - 1e-13 * (1.0 + value.abs()) {
                theta = cand;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !moved {
            break;
        }
    }
    Ok(FitResult {
        k,
        theta,
        lpl: value,
        converged,
        iterations,
        gradient_norm: gnorm,
        quadrature: design.scheme.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;

    fn toy() -> PointPattern {
        let pts = [(0.3, 0.3), (0.33, 0.31), (0.5, 0.52), (0.7, 0.4), (0.05, 0.95)];
        PointPattern::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect(), Window::square(1.0).unwrap()).unwrap()
    }

    #[test]
    fn grid_side_default() {
        assert_eq!(default_grid_side(10), 128);
        assert_eq!(default_grid_side(1000), 253);
    }

    #[test]
    fn weights_sum_to_eroded_area() {
        let b = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
        let d = build_quadrature(&toy(), &b, 0.0, None, 3).unwrap();
        let sum: f64 = d.rows.iter().map(|r| r.weight).sum();
        assert!((sum - 0.84 * 0.84).abs() < 1e-12);
        assert_eq!(d.scheme.n_data, 4);
        assert!(d.data_rows().all(|r| r.weight == 0.0));
    }

    #[test]
    fn empty_pattern_design() {
        let b = BasisSystem::new(BasisKind::Haar, 0.08).unwrap();
        let p = PointPattern::empty(Window::square(1.0).unwrap());
        let d = build_quadrature(&p, &b, 0.0, Some(16), 2).unwrap();
        assert_eq!(d.rows.len(), 256);
        assert!(d.rows.iter().all(|r| r.s == vec![1.0, 0.0, 0.0]));
        assert_eq!(fit_lpl(&d, 1, &FitOptions::default()), Err(Error::NoDataPoints));
    }

    #[test]
    fn erosion_failure_propagates() {
        let b = BasisSystem::new(BasisKind::Haar, 0.5).unwrap();
        assert!(matches!(build_quadrature(&toy(), &b, 0.0, None, 2), Err(Error::EmptyErosion { .. })));
    }

    #[test]
    fn lpl_at_zero_and_poisson_optimum() {
        let b = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
        let d = build_quadrature(&toy(), &b, 0.0, None, 3).unwrap();
        let area = d.scheme.area;
        assert!((lpl_value(&d, &[0.0, 0.0, 0.0]).unwrap() + area).abs() < 1e-12);
        let n = 4.0;
        let t0 = (n / area).ln();
        assert!((lpl_value(&d, &[t0]).unwrap() - (n * t0 - n)).abs() < 1e-10);
        assert!(matches!(lpl_value(&d, &[0.0; 5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hard_core_blocking() {
        let b = BasisSystem::new(BasisKind::Cosine, 0.07).unwrap();
        let d = build_quadrature(&toy(), &b, 0.05, None, 2).unwrap();
        // (0.3,0.3)-(0.33,0.31) are closer than 0.05
        assert_eq!(lpl_value(&d, &[1.0, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert!(d.scheme.blocked_dummies > 0);
    }
}
