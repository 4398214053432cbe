//! Sandwich variance estimation, pointwise confidence bands, composite AIC
//! and data-driven choice of the truncation level.
//!
//! All matrices are stored per unit area of the eroded window `W-`:
//!
//! ```text
//! A = |W-|^-1 sum_u S(u, X\u) S(u, X\u)'
//! B = |W-|^-1 sum'_{u,v} [ S(u, X\{u,v}) S(v, X\{u,v})' (1/phi(|v-u|) - 1)
//!                          + phi~(|v-u| - delta) phi~(|v-u| - delta)' ]
//! Pi = |W-|^-1 A^-1 (A + B) A^-1
//! ```
//!
//! where `S_0 = 1`, `phi~ = (0, phi_1, .., phi_K)` and `sum'` runs over
//! ordered pairs of distinct points of `X ∩ W-` at distance in
//! `[delta, R + delta]`. Only data points are needed; no quadrature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{quadrature_nodes, BasisSystem};
use crate::error::{Error, Result};
use crate::fit::{build_quadrature, fit_lpl, Design, FitOptions, FitResult, QuadratureScheme};
use crate::gibbs::suff_stats_into;
use crate::pattern::{NeighborIndex, PointPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct VcovPair {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// `|W-|`.
    pub area: f64,
}

pub fn estimate_vcov(pattern: &PointPattern, fit: &FitResult, basis: &BasisSystem, delta: f64) -> Result<VcovPair> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let k = fit.k;
    let dim = k + 1;
    let reach = delta + basis.range();
    let area = fit.quadrature.area;
    let eroded = &fit.quadrature.eroded;
    let index = NeighborIndex::new(pattern, reach);
    let ids = pattern.ids_inside(eroded);

    // S(u, X \ u) for every data point in W-, keyed by position in `ids`.
    let mut stats = vec![0.0; ids.len() * dim];
    for (row, &id) in ids.iter().enumerate() {
        let s = &mut stats[row * dim..(row + 1) * dim];
        s[0] = 1.0;
        suff_stats_into(basis, delta, &pattern.points()[id], &index, Some(id), &mut s[1..]);
    }
    let mut pos = vec![usize::MAX; pattern.len()];
    for (row, &id) in ids.iter().enumerate() {
        pos[id] = row;
    }

    let mut a = DMatrix::zeros(dim, dim);
    for row in stats.chunks(dim) {
        let s = DVector::from_column_slice(row);
        a += &s * s.transpose();
    }

    let mut b = DMatrix::zeros(dim, dim);
    let theta = fit.coefficients();
    let mut phi = vec![0.0; k];
    let mut su = DVector::zeros(dim);
    let mut sv = DVector::zeros(dim);
    let mut tilde = DVector::zeros(dim);
    for (row_u, &id_u) in ids.iter().enumerate() {
        let u = pattern.points()[id_u];
        let mut err = None;
        index.for_each_within(&u, delta, reach, |id_v, d| {
            let row_v = pos[id_v];
            if row_v == usize::MAX || err.is_some() {
                return;
            }
            basis.values_into(d - delta, &mut phi);
            let log_phi: f64 = theta.iter().zip(&phi).map(|(t, p)| t * p).sum();
            let weight = (-log_phi).exp() - 1.0;
            if !weight.is_finite() {
                err = Some(Error::SingularPhi { r: d });
                return;
            }
            tilde[0] = 0.0;
            su[0] = 1.0;
            sv[0] = 1.0;
            for j in 1..dim {
                tilde[j] = phi[j - 1];
                su[j] = stats[row_u * dim + j] - phi[j - 1];
                sv[j] = stats[row_v * dim + j] - phi[j - 1];
            }
            b += weight * &su * sv.transpose() + &tilde * tilde.transpose();
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    a /= area;
    b /= area;
    // ordered pairs make B symmetric up to rounding
    let b = (&b + b.transpose()) * 0.5;
    Ok(VcovPair { a_hat: a, b_hat: b, area })
}

impl VcovPair {
    fn a_inverse(&self) -> Result<DMatrix<f64>> {
        let ch = self.a_hat.clone().cholesky().ok_or(Error::SingularSensitivity)?;
        Ok(ch.inverse())
    }

    /// `Pi = |W-|^-1 A^-1 (A + B) A^-1`, the approximate covariance of the
    /// coefficient estimates.
    pub fn sandwich(&self) -> Result<DMatrix<f64>> {
        let inv = self.a_inverse()?;
        let pi = &inv * (&self.a_hat + &self.b_hat) * &inv / self.area;
        Ok((&pi + pi.transpose()) * 0.5)
    }

    /// `trace((A + B) A^-1)`; equal to `trace(A Pi)` up to the area factor.
    pub fn caic_penalty(&self) -> Result<f64> {
        let inv = self.a_inverse()?;
        Ok(((&self.a_hat + &self.b_hat) * inv).trace())
    }
}

/// `s_n(r) = sqrt(phi~(r - delta)' Pi phi~(r - delta))`.
pub fn pointwise_se(v: &VcovPair, basis: &BasisSystem, delta: f64, r: f64) -> Result<f64> {
    let pi = v.sandwich()?;
    Ok(se_from_sandwich(&pi, basis, delta, r))
}

fn se_from_sandwich(pi: &DMatrix<f64>, basis: &BasisSystem, delta: f64, r: f64) -> f64 {
    let dim = pi.nrows();
    let mut tilde = DVector::zeros(dim);
    for j in 1..dim {
        tilde[j] = basis.value(j, r - delta);
    }
    (tilde.dot(&(pi * &tilde))).max(0.0).sqrt()
}

/// `-2 LPL(theta) + 2 trace((A + B) A^-1)`.
pub fn caic(fit: &FitResult, v: &VcovPair) -> Result<f64> {
    Ok(-2.0 * fit.lpl + 2.0 * v.caic_penalty()?)
}

/// Standard normal quantile `z_{alpha/2}`.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha {alpha} not in (0, 1)")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - alpha / 2.0))
}

/// `n` midpoints of equal panels on `[delta, R + delta]`, i.e. the grid
/// `delta + eps, .., R + delta - eps` with `eps = R / (2n)`.
pub fn default_r_grid(delta: f64, range: f64, n: usize) -> Vec<f64> {
    let h = range / n as f64;
    (0..n).map(|i| delta + (i as f64 + 0.5) * h).collect()
}

pub const DEFAULT_GRID_SIZE: usize = 512;

/// Sampled estimate of `g = log phi` and `phi` with pointwise bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub r: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub g_lo: Vec<f64>,
    pub g_hi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub phi_lo: Vec<f64>,
    pub phi_hi: Vec<f64>,
}

impl CurveEstimate {
    /// Bands `g_hat -/+ z se`; the `phi` band exponentiates the `g` band.
    pub fn new(
        basis: &BasisSystem,
        fit: &FitResult,
        vcov: &VcovPair,
        delta: f64,
        alpha: f64,
        grid: &[f64],
    ) -> Result<Self> {
        let z = normal_quantile(alpha)?;
        let pi = vcov.sandwich()?;
        let mut c = Self::empty(grid.len());
        for &r in grid {
            let g = basis.reconstruct(fit.coefficients(), delta, r)?;
            let se = se_from_sandwich(&pi, basis, delta, r);
            c.r.push(r);
            c.g_hat.push(g);
            c.se.push(se);
            c.g_lo.push(g - z * se);
            c.g_hi.push(g + z * se);
            c.phi_hat.push(g.exp());
            c.phi_lo.push((g - z * se).exp());
            c.phi_hi.push((g + z * se).exp());
        }
        Ok(c)
    }

    fn empty(n: usize) -> Self {
        Self {
            r: Vec::with_capacity(n),
            g_hat: Vec::with_capacity(n),
            se: Vec::with_capacity(n),
            g_lo: Vec::with_capacity(n),
            g_hi: Vec::with_capacity(n),
            phi_hat: Vec::with_capacity(n),
            phi_lo: Vec::with_capacity(n),
            phi_hi: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Panel width when the grid is a set of equally spaced midpoints.
    fn panel_width(&self) -> f64 {
        match self.r.len() {
            0 => 0.0,
            1 => 0.0,
            n => (self.r[n - 1] - self.r[0]) / (n - 1) as f64,
        }
    }

    /// Value of `r` nearest to `target` on the grid.
    pub fn nearest(&self, target: f64) -> usize {
        let mut best = 0;
        for (i, r) in self.r.iter().enumerate() {
            if (r - target).abs() < (self.r[best] - target).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    Ok,
    NotConverged,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub lpl: f64,
    pub penalty: f64,
    pub caic: f64,
    pub status: TraceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub rows: Vec<TraceRow>,
    pub chosen: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub k_max: usize,
    /// Dummy grid side; `None` uses [`crate::fit::default_grid_side`].
    pub nd: Option<usize>,
    pub alpha: f64,
    pub grid_size: usize,
    pub fit: FitOptions,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { k_max: 15, nd: None, alpha: 0.05, grid_size: DEFAULT_GRID_SIZE, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub trace: SelectionTrace,
    /// Fit for every `K = 1..=k_max`, index `K - 1`.
    pub fits: Vec<FitResult>,
    pub fit: FitResult,
    pub vcov: VcovPair,
    pub curve: CurveEstimate,
    pub quadrature: QuadratureScheme,
}

impl Selection {
    pub fn chosen_k(&self) -> usize {
        self.trace.chosen
    }
}

/// Fit `K = 1..=k_max` on one shared design and keep the `K` minimising
/// cAIC (ties to the smaller `K`). Levels whose fit fails to converge or
/// whose sensitivity matrix is singular are recorded and skipped.
pub fn select_k(pattern: &PointPattern, basis: &BasisSystem, delta: f64, opts: &SelectOptions) -> Result<Selection> {
    if opts.k_max < 1 {
        return Err(Error::InvalidConfig("k_max must be >= 1".into()));
    }
    let design = build_quadrature(pattern, basis, delta, opts.nd, opts.k_max)?;
    select_k_on_design(pattern, basis, &design, opts)
}

pub fn select_k_on_design(
    pattern: &PointPattern,
    basis: &BasisSystem,
    design: &Design,
    opts: &SelectOptions,
) -> Result<Selection> {
    let delta = design.delta;
    let mut rows = Vec::with_capacity(opts.k_max);
    let mut fits = Vec::with_capacity(opts.k_max);
    let mut best: Option<(usize, f64, VcovPair)> = None;
    for k in 1..=opts.k_max.min(design.k_max) {
        let fit = fit_lpl(design, k, &opts.fit)?;
        let (penalty, status, vcov) = if !fit.converged {
            (f64::NAN, TraceStatus::NotConverged, None)
        } else {
            match estimate_vcov(pattern, &fit, basis, delta) {
                Ok(v) => match v.caic_penalty() {
                    Ok(p) => (p, TraceStatus::Ok, Some(v)),
                    Err(_) => (f64::NAN, TraceStatus::Singular, None),
                },
                Err(Error::SingularPhi { .. }) | Err(Error::SingularSensitivity) => {
                    (f64::NAN, TraceStatus::Singular, None)
                }
                Err(e) => return Err(e),
            }
        };
        let value = -2.0 * fit.lpl + 2.0 * penalty;
        if let Some(v) = vcov {
            if best.as_ref().is_none_or(|(_, c, _)| value < *c) {
                best = Some((k, value, v));
            }
        }
        rows.push(TraceRow { k, lpl: fit.lpl, penalty, caic: value, status });
        fits.push(fit);
    }
    let (chosen, _, vcov) = best.ok_or(Error::SingularSensitivity)?;
    let fit = fits[chosen - 1].clone();
    let grid = default_r_grid(delta, basis.range(), opts.grid_size);
    let curve = CurveEstimate::new(basis, &fit, &vcov, delta, opts.alpha, &grid)?;
    Ok(Selection { trace: SelectionTrace { rows, chosen }, fits, fit, vcov, curve, quadrature: design.scheme.clone() })
}

/// `int_0^R (g_hat(t + delta) - g(t + delta))^2 w(t) dt` by composite
/// Gauss-Legendre. `theta_hat` holds `theta_1..theta_K`.
pub fn ise<G: Fn(f64) -> f64>(basis: &BasisSystem, theta_hat: &[f64], g_true: G, delta: f64) -> f64 {
    quadrature_nodes(basis.range())
        .map(|(t, h)| {
            let e = basis.series_value(theta_hat, t) - g_true(t + delta);
            e * e * basis.weight(t) * h
        })
        .sum()
}

/// Coefficient-space ISE: `sum_{k<=K} (theta_hat_k - theta_k)^2 + sum_{k>K} theta_k^2`.
pub fn ise_coefficients(theta_hat: &[f64], theta_true: &[f64]) -> f64 {
    let n = theta_hat.len().max(theta_true.len());
    (0..n)
        .map(|i| {
            let a = theta_hat.get(i).copied().unwrap_or(0.0);
            let b = theta_true.get(i).copied().unwrap_or(0.0);
            (a - b) * (a - b)
        })
        .sum()
}

/// Relative squared L2 error (weight 1) of one curve on its midpoint grid.
pub fn relative_error<G: Fn(f64) -> f64>(curve: &CurveEstimate, g_true: &G) -> Result<f64> {
    let h = curve.panel_width();
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, g) in curve.r.iter().zip(&curve.g_hat) {
        let t = g_true(*r);
        num += (g - t) * (g - t) * h;
        den += t * t * h;
    }
    if den == 0.0 {
        return Err(Error::ZeroTrueNorm);
    }
    Ok(num / den)
}

/// Relative error of the series `theta_hat` on the `n`-point midpoint grid
/// of `[delta, R + delta]`.
pub fn relative_error_coefficients<G: Fn(f64) -> f64>(
    basis: &BasisSystem,
    theta_hat: &[f64],
    g_true: &G,
    delta: f64,
    n: usize,
) -> Result<f64> {
    let h = basis.range() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) * h;
        let g = g_true(t + delta);
        let e = basis.series_value(theta_hat, t) - g;
        num += e * e;
        den += g * g;
    }
    if den == 0.0 {
        return Err(Error::ZeroTrueNorm);
    }
    Ok(num / den)
}

/// Mean relative squared L2 error over replicates.
pub fn relative_loss<G: Fn(f64) -> f64>(estimates: &[CurveEstimate], g_true: G) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidConfig("no estimates".into()));
    }
    let mut total = 0.0;
    for c in estimates {
        total += relative_error(c, &g_true)?;
    }
    Ok(total / estimates.len() as f64)
}
