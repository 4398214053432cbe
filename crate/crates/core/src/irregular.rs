//! Estimation of the irregular parameters: the hard-core distance from the
//! smallest interpoint distance, and the interaction range from the border
//! corrected Ripley K function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{NeighborIndex, PointPattern};

/// `d_min * n / (n + 1)`.
pub fn estimate_delta(pattern: &PointPattern) -> Result<f64> {
    let n = pattern.len() as f64;
    Ok(pattern.min_interpoint_distance()? * n / (n + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFunctionEstimate {
    pub r: Vec<f64>,
    pub k_hat: Vec<f64>,
    pub n: usize,
    pub area: f64,
}

impl KFunctionEstimate {
    /// Poisson reference `pi r^2` on the same grid.
    pub fn k_poisson(&self) -> Vec<f64> {
        self.r.iter().map(|r| PI * r * r).collect()
    }
}

/// Border-method estimate
///
/// ```text
/// K(r) = |W| / (n * lambda |W ⊖ r|) * sum_{u in X ∩ (W ⊖ r)} #{v in X : 0 < |v - u| <= r}
/// ```
///
/// with `lambda = n / |W|`. Patterns with fewer than two points give zero.
pub fn ripley_k(pattern: &PointPattern, r_grid: &[f64]) -> Result<KFunctionEstimate> {
    let w = pattern.window();
    let limit = 0.5 * w.width().min(w.height());
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    if r_max >= limit {
        return Err(Error::GridTooLarge { r_max, limit });
    }
    if r_grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::OutOfRange("r grid must be nonnegative".into()));
    }
    let n = pattern.len();
    let area = w.area();
    if n < 2 {
        return Ok(KFunctionEstimate { r: r_grid.to_vec(), k_hat: vec![0.0; r_grid.len()], n, area });
    }

    // Distances from each point to its neighbours within r_max, and to the
    // window boundary.
    let index = NeighborIndex::new(pattern, r_max);
    let mut near: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for p in pattern.points() {
        let mut d = Vec::new();
        index.for_each_within(p, 0.0, r_max, |_, dist| d.push(dist));
        d.sort_by(f64::total_cmp);
        near.push(d);
        boundary.push((p.x - w.x_min).min(w.x_max - p.x).min(p.y - w.y_min).min(w.y_max - p.y));
    }

    let lambda = n as f64 / area;
    let k_hat = r_grid
        .iter()
        .map(|&r| {
            if r == 0.0 {
                return 0.0;
            }
            let eroded = (w.width() - 2.0 * r) * (w.height() - 2.0 * r);
            let mut count = 0usize;
            for (d, b) in near.iter().zip(&boundary) {
                if *b >= r {
                    count += d.partition_point(|x| *x <= r);
                }
            }
            area / (n as f64 * lambda * eroded) * count as f64
        })
        .collect();
    Ok(KFunctionEstimate { r: r_grid.to_vec(), k_hat, n, area })
}

/// `grid_size` points `r_max * i / grid_size`, `i = 1..=grid_size`.
pub fn range_grid(r_max: f64, grid_size: usize) -> Vec<f64> {
    (1..=grid_size).map(|i| r_max * i as f64 / grid_size as f64).collect()
}

/// Grid value maximising `(K(r) - pi r^2)^2`; ties go to the smaller `r`.
pub fn argmax_deviation(r: &[f64], k_hat: &[f64]) -> Result<f64> {
    if r.is_empty() || r.len() != k_hat.len() {
        return Err(Error::DimensionMismatch { expected: r.len(), got: k_hat.len() });
    }
    let mut best = 0;
    let mut best_dev = f64::NEG_INFINITY;
    for (i, (ri, ki)) in r.iter().zip(k_hat).enumerate() {
        let dev = (ki - PI * ri * ri).powi(2);
        if dev > best_dev {
            best = i;
            best_dev = dev;
        }
    }
    Ok(r[best])
}

/// Range estimate `R + delta`: the grid distance of maximal squared
/// deviation between the border K estimate and `pi r^2`.
pub fn estimate_range(pattern: &PointPattern, r_max: f64, grid_size: usize) -> Result<f64> {
    if grid_size == 0 || !(r_max > 0.0) {
        return Err(Error::InvalidConfig("range grid must be nonempty with r_max > 0".into()));
    }
    let grid = range_grid(r_max, grid_size);
    let k = ripley_k(pattern, &grid)?;
    argmax_deviation(&k.r, &k.k_hat)
}

/// Hard core and range `R` for the fitting pipeline: `delta` first, then
/// `R = range - delta`, floored at four grid steps.
pub fn estimate_irregular(
    pattern: &PointPattern,
    estimate_hard_core: bool,
    r_max: f64,
    grid_size: usize,
) -> Result<(f64, f64)> {
    let delta = if estimate_hard_core { estimate_delta(pattern)? } else { 0.0 };
    let reach = estimate_range(pattern, r_max, grid_size)?;
    let floor = 4.0 * r_max / grid_size as f64;
    Ok((delta, (reach - delta).max(floor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Point, Window};

    #[test]
    fn delta_examples() {
        let w = Window::square(1.0).unwrap();
        let p = PointPattern::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 0.3), Point::new(0.1, 0.0)], w).unwrap();
        assert!((estimate_delta(&p).unwrap() - 0.075).abs() < 1e-15);
        assert!(estimate_delta(&PointPattern::empty(w)).is_err());
    }

    #[test]
    fn k_degenerate_and_hand_computed() {
        let w = Window::square(10.0).unwrap();
        let grid = [0.05, 0.2];
        let k = ripley_k(&PointPattern::empty(w), &grid).unwrap();
        assert_eq!(k.k_hat, vec![0.0, 0.0]);
        let p = PointPattern::new(vec![Point::new(5.0, 5.0), Point::new(5.1, 5.0)], w).unwrap();
        let k = ripley_k(&p, &grid).unwrap();
        assert_eq!(k.k_hat[0], 0.0);
        // both points are centres, each sees the other: 100 / (2 * 0.02 * 9.6^2) * 2
        let expected = 100.0 / (2.0 * 0.02 * 9.6 * 9.6) * 2.0;
        assert!((k.k_hat[1] - expected).abs() < 1e-12);
        assert!(matches!(ripley_k(&p, &[5.0]), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn analytic_csr_deviation_ties_to_smallest() {
        let r = range_grid(0.16, 512);
        let k: Vec<f64> = r.iter().map(|x| PI * x * x).collect();
        assert_eq!(argmax_deviation(&r, &k).unwrap(), r[0]);
    }
}
