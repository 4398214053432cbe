//! Orthonormal function systems on `[0, R]` used to expand the log
//! interaction function: cosine, Haar and Fourier-Bessel (planar, order 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bessel::{j0, j1, BesselRootTable};
use crate::error::{Error, Result};

/// Largest supported basis index.
pub const K_MAX: usize = 32;

/// Panels used by [`BasisSystem::project`] and [`quadrature_nodes`]. A
/// power of two, so Haar breakpoints fall on panel edges.
pub const PROJECTION_PANELS: usize = 4096;

/// 3-point Gauss-Legendre on `[-1, 1]`.
const GL3: [(f64, f64); 3] =
    [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// Nodes and weights of composite 3-point Gauss-Legendre on `[0, range]`
/// with [`PROJECTION_PANELS`] panels.
pub fn quadrature_nodes(range: f64) -> impl Iterator<Item = (f64, f64)> {
    let h = range / PROJECTION_PANELS as f64;
    (0..PROJECTION_PANELS).flat_map(move |i| {
        let mid = (i as f64 + 0.5) * h;
        GL3.iter().map(move |&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Cosine,
    Haar,
    #[serde(alias = "fb", alias = "bessel")]
    FourierBessel,
}

impl BasisKind {
    pub const ALL: [BasisKind; 3] = [BasisKind::Cosine, BasisKind::Haar, BasisKind::FourierBessel];

    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Cosine => "cosine",
            BasisKind::Haar => "haar",
            BasisKind::FourierBessel => "fourier-bessel",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(BasisKind::Cosine),
            "haar" => Ok(BasisKind::Haar),
            "fourier-bessel" | "fourierbessel" | "fb" | "bessel" => Ok(BasisKind::FourierBessel),
            other => Err(Error::InvalidConfig(format!("unknown basis '{other}'"))),
        }
    }
}

/// An orthonormal system `{phi_k}` on `[0, R]` with weight `w`:
/// `int_0^R phi_j phi_k w = 1(j = k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    kind: BasisKind,
    range: f64,
    /// Fourier-Bessel only: `alpha_k / R` and `sqrt(2) / (R J1(alpha_k))`.
    fb_freq: Vec<f64>,
    fb_norm: Vec<f64>,
}

impl BasisSystem {
    pub fn new(kind: BasisKind, range: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::OutOfRange(format!("basis range {range} must be > 0")));
        }
        let (fb_freq, fb_norm) = if kind == BasisKind::FourierBessel {
            let table = BesselRootTable::new(K_MAX);
            table.roots().iter().map(|&a| (a / range, std::f64::consts::SQRT_2 / (range * j1(a)))).unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self { kind, range, fb_freq, fb_norm })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// `R`, the length of the support.
    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn weight(&self, r: f64) -> f64 {
        match self.kind {
            BasisKind::Cosine | BasisKind::Haar => 1.0,
            BasisKind::FourierBessel => r,
        }
    }

    /// `phi_k(r)` with argument checks.
    pub fn eval(&self, k: usize, r: f64) -> Result<f64> {
        if !(1..=K_MAX).contains(&k) {
            return Err(Error::OutOfRange(format!("basis index {k} not in 1..={K_MAX}")));
        }
        if !(r >= 0.0 && r <= self.range) {
            return Err(Error::OutOfRange(format!("r = {r} not in [0, {}]", self.range)));
        }
        Ok(self.value(k, r))
    }

    /// `phi_k(r)` without checks; `r` is clamped into `[0, R]`.
    #[inline]
    pub fn value(&self, k: usize, r: f64) -> f64 {
        let r = r.clamp(0.0, self.range);
        let big_r = self.range;
        match self.kind {
            BasisKind::Cosine => {
                if k == 1 {
                    1.0 / big_r.sqrt()
                } else {
                    (2.0 / big_r).sqrt() * ((k - 1) as f64 * std::f64::consts::PI * r / big_r).cos()
                }
            }
            BasisKind::Haar => haar(k, r / big_r) / big_r.sqrt(),
            BasisKind::FourierBessel => self.fb_norm[k - 1] * j0(r * self.fb_freq[k - 1]),
        }
    }

    /// Fill `out[i] = phi_{i+1}(r)`.
    #[inline]
    pub fn values_into(&self, r: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(i + 1, r);
        }
    }

    /// `theta_k = int_0^R f(r + delta) phi_k(r) w(r) dr` for `k = 1..=k_count`,
    /// by [`quadrature_nodes`].
    pub fn project_all<F: Fn(f64) -> f64>(&self, f: F, delta: f64, k_count: usize) -> Result<Vec<f64>> {
        check_k_count(k_count)?;
        let mut theta = vec![0.0; k_count];
        let mut phi = vec![0.0; k_count];
        for (r, h) in quadrature_nodes(self.range) {
            let fv = f(r + delta);
            if !fv.is_finite() {
                return Err(Error::NonFiniteFunction { r: r + delta });
            }
            self.values_into(r, &mut phi);
            let fw = fv * self.weight(r) * h;
            for (t, p) in theta.iter_mut().zip(&phi) {
                *t += fw * p;
            }
        }
        Ok(theta)
    }

    /// Single coefficient `theta_k`, see [`project_all`](Self::project_all).
    pub fn project<F: Fn(f64) -> f64>(&self, f: F, delta: f64, k: usize) -> Result<f64> {
        if k < 1 {
            return Err(Error::OutOfRange("basis index 0".into()));
        }
        Ok(self.project_all(f, delta, k)?[k - 1])
    }

    /// `sum_k theta_k phi_k(r - delta)` for `r` in `[delta, R + delta]`.
    /// `theta` holds `theta_1..theta_K` (no intercept).
    pub fn reconstruct(&self, theta: &[f64], delta: f64, r: f64) -> Result<f64> {
        check_k_count(theta.len())?;
        let t = r - delta;
        if !(t >= 0.0 && t <= self.range) {
            return Err(Error::OutOfRange(format!("r = {r} not in [{delta}, {}]", delta + self.range)));
        }
        Ok(self.series_value(theta, t))
    }

    /// `sum_k theta_k phi_k(t)` without range checks.
    #[inline]
    pub fn series_value(&self, theta: &[f64], t: f64) -> f64 {
        theta.iter().enumerate().map(|(i, th)| th * self.value(i + 1, t)).sum()
    }
}

fn check_k_count(k: usize) -> Result<()> {
    if k > K_MAX {
        return Err(Error::OutOfRange(format!("truncation {k} exceeds {K_MAX}")));
    }
    Ok(())
}

/// Unnormalised Haar function on `[0, 1]`, scaled by `sqrt(2^m)`.
/// For `k = 2^m + l` (`1 <= l <= 2^m`) it is `+sqrt(2^m)` on the first half of
/// the `l`-th dyadic interval of length `2^-m`, `-sqrt(2^m)` on the second.
/// Intervals are left-closed, right-open; `t = 1` belongs to the last one.
#[inline]
fn haar(k: usize, t: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let m = usize::BITS - 1 - (k - 1).leading_zeros();
    let l = k - (1usize << m);
    let halves = 1usize << (m + 1);
    let idx = ((t * halves as f64).floor() as usize).min(halves - 1);
    let amp = ((1usize << m) as f64).sqrt();
    if idx == 2 * l - 2 {
        amp
    } else if idx == 2 * l - 1 {
        -amp
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let c = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
        assert!((c.eval(1, 0.03).unwrap() - 3.5355339059327378).abs() < 1e-12);
        assert!((c.eval(2, 0.0).unwrap() - 5.0).abs() < 1e-12);
        let h = BasisSystem::new(BasisKind::Haar, 0.08).unwrap();
        for r in [0.0, 0.02, 0.08] {
            assert!((h.eval(1, r).unwrap() - 1.0 / 0.08f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let c = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
        assert!(c.eval(0, 0.01).is_err());
        assert!(c.eval(K_MAX + 1, 0.01).is_err());
        assert!(c.eval(1, -1e-3).is_err());
        assert!(c.eval(1, 0.09).is_err());
        assert!(c.reconstruct(&[1.0], 0.01, 0.005).is_err());
        assert!(BasisSystem::new(BasisKind::Haar, 0.0).is_err());
    }

    #[test]
    fn haar_index_layout() {
        // k = 2: +1 on [0, 1/2), -1 on [1/2, 1]
        assert_eq!(haar(2, 0.25), 1.0);
        assert_eq!(haar(2, 0.75), -1.0);
        assert_eq!(haar(2, 1.0), -1.0);
        // k = 4 = 2^1 + 2: support [1/2, 1]
        assert_eq!(haar(4, 0.25), 0.0);
        assert!((haar(4, 0.6) - 2f64.sqrt()).abs() < 1e-15);
        assert!((haar(4, 0.9) + 2f64.sqrt()).abs() < 1e-15);
        // k = 8 = 2^2 + 4: support [3/4, 1]
        assert_eq!(haar(8, 0.7), 0.0);
        assert_eq!(haar(8, 0.8), 2.0);
        assert_eq!(haar(8, 1.0), -2.0);
    }

    #[test]
    fn projection_of_constants_and_zero() {
        let c = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
        let th = c.project_all(|_| 0.0, 0.0, 6).unwrap();
        assert!(th.iter().all(|t| *t == 0.0));
        let th = c.project_all(|_| 2.5, 0.01, 6).unwrap();
        assert!((th[0] - 2.5 * 0.08f64.sqrt()).abs() < 1e-12);
        for t in &th[1..] {
            assert!(t.abs() < 1e-12);
        }
        assert!(matches!(
            c.project(|r| if r > 0.05 { f64::NAN } else { 0.0 }, 0.0, 1),
            Err(Error::NonFiniteFunction { .. })
        ));
    }

    #[test]
    fn reconstruct_unit_vectors() {
        for kind in BasisKind::ALL {
            let b = BasisSystem::new(kind, 0.07).unwrap();
            assert_eq!(b.reconstruct(&[0.0; 5], 0.01, 0.04).unwrap(), 0.0);
            for k in 1..=5 {
                let mut e = vec![0.0; 5];
                e[k - 1] = 1.0;
                let r = 0.043;
                assert_eq!(b.reconstruct(&e, 0.01, r).unwrap(), b.value(k, r - 0.01));
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Haar".parse::<BasisKind>().unwrap(), BasisKind::Haar);
        assert_eq!("fb".parse::<BasisKind>().unwrap(), BasisKind::FourierBessel);
        assert!("legendre".parse::<BasisKind>().is_err());
        let k: BasisKind = serde_json::from_str("\"fourier-bessel\"").unwrap();
        assert_eq!(k, BasisKind::FourierBessel);
    }
}
