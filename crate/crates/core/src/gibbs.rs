//! Pairwise interaction Gibbs models: interaction functions, the Papangelou
//! conditional intensity and the sufficient statistics `S_k` of the series
//! expansion.
//!
//! An interaction function `phi` has hard core `delta >= 0` and range
//! `R > 0`: `phi = 0` on `[0, delta)`, `phi = 1` beyond `R + delta`. A pair at
//! distance exactly `delta` takes the interacting branch, matching the pair
//! selection `delta <= |v - u| <= R + delta` used by every estimator.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSystem};
use crate::error::{Error, Result};
use crate::pattern::{NeighborIndex, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum InteractionKind {
    /// `phi = 1`.
    Poisson,
    /// `phi = gamma` on `[delta, R + delta]`.
    Strauss { gamma: f64 },
    /// `alpha + (1 - alpha) ((r - delta) / R)^2`, a Diggle-Gratton variant
    /// bounded away from zero.
    DiggleGratton { alpha: f64 },
    /// Upper break points (the last one equals `R + delta`) and the level on
    /// each `(break[i-1], break[i]]`.
    PiecewiseConstant { breaks: Vec<f64>, levels: Vec<f64> },
    /// Cubic in `s = r / (R + delta)`: `c[0] s^3 + c[1] s^2 + c[2] s + c[3]`.
    Cubic { scaled: [f64; 4] },
    /// `eta (1 + cos(3 pi t / 2)) + (1 - eta) t^gamma` with `t = (r - delta) / R`.
    CosineMixture { eta: f64, gamma: f64 },
    /// `log phi(r) = sum_k theta_k phi_k(r - delta)`.
    Series { basis: BasisSystem, theta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFunction {
    delta: f64,
    range: f64,
    kind: InteractionKind,
}

impl InteractionFunction {
    /// Validates the parameters and the existence condition: a model without
    /// hard core must satisfy `phi <= 1`.
    pub fn new(delta: f64, range: f64, kind: InteractionKind) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidModel(format!("hard core {delta} must be >= 0")));
        }
        let poisson = matches!(kind, InteractionKind::Poisson);
        if !(range.is_finite() && (range > 0.0 || (poisson && range == 0.0))) {
            return Err(Error::InvalidModel(format!("range {range} must be > 0")));
        }
        match &kind {
            InteractionKind::Strauss { gamma } if !(*gamma >= 0.0 && gamma.is_finite()) => {
                return Err(Error::InvalidModel(format!("Strauss gamma {gamma} must be >= 0")));
            }
            InteractionKind::DiggleGratton { alpha } if !(*alpha > 0.0 && *alpha <= 1.0) => {
                return Err(Error::InvalidModel(format!("alpha {alpha} must lie in (0, 1]")));
            }
            InteractionKind::PiecewiseConstant { breaks, levels } => {
                if breaks.is_empty() || breaks.len() != levels.len() {
                    return Err(Error::InvalidModel("breaks and levels must have equal nonzero length".into()));
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks[0] <= delta {
                    return Err(Error::InvalidModel("breaks must increase and exceed delta".into()));
                }
                if (breaks[breaks.len() - 1] - (range + delta)).abs() > 1e-12 {
                    return Err(Error::InvalidModel("last break must equal R + delta".into()));
                }
                if levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(Error::InvalidModel("levels must be finite and >= 0".into()));
                }
            }
            InteractionKind::Series { basis, theta } => {
                if (basis.range() - range).abs() > 1e-12 * range {
                    return Err(Error::InvalidModel("series basis range differs from R".into()));
                }
                if theta.len() > crate::basis::K_MAX || theta.iter().any(|t| !t.is_finite()) {
                    return Err(Error::InvalidModel("series coefficients invalid".into()));
                }
            }
            _ => {}
        }
        let f = Self { delta, range, kind };
        if delta == 0.0 {
            let sup = f.sup_on_support();
            if sup > 1.0 + 1e-12 {
                return Err(Error::InvalidModel(format!("phi reaches {sup} > 1 without a hard core")));
            }
        }
        Ok(f)
    }

    pub fn poisson() -> Self {
        Self { delta: 0.0, range: 0.0, kind: InteractionKind::Poisson }
    }

    pub fn strauss(gamma: f64, range: f64, delta: f64) -> Result<Self> {
        Self::new(delta, range, InteractionKind::Strauss { gamma })
    }

    /// PIF1: `delta = 0`, `R = 0.08`, `alpha = 0.05`.
    pub fn pif1() -> Self {
        Self::new(0.0, 0.08, InteractionKind::DiggleGratton { alpha: 0.05 }).expect("valid")
    }

    /// PIF2: piecewise Strauss, `delta = 0`, `R = 0.08`.
    pub fn pif2() -> Self {
        Self::new(
            0.0,
            0.08,
            InteractionKind::PiecewiseConstant {
                breaks: vec![0.01, 0.04, 0.06, 0.08],
                levels: vec![0.5, 0.2, 0.6, 0.8],
            },
        )
        .expect("valid")
    }

    /// PIF3: cubic through `(0.01, 1.3)`, `(0.03, 1.05)`, `(0.06, 1.2)`,
    /// `(0.08, 1)` with hard core `0.01`, `R = 0.07`.
    pub fn pif3() -> Self {
        let delta = 0.01;
        let range = 0.07;
        let scaled = solve_cubic([delta, 0.03, 0.06, range + delta], [1.3, 1.05, 1.2, 1.0], range + delta);
        Self::new(delta, range, InteractionKind::Cubic { scaled }).expect("valid")
    }

    /// PIF4: cosine mixture with `eta = 2/3`, `gamma = 1`, hard core `0.01`,
    /// `R = 0.07`.
    pub fn pif4() -> Self {
        Self::new(0.01, 0.07, InteractionKind::CosineMixture { eta: 2.0 / 3.0, gamma: 1.0 }).expect("valid")
    }

    pub fn series(basis: BasisSystem, delta: f64, theta: Vec<f64>) -> Result<Self> {
        let range = basis.range();
        Self::new(delta, range, InteractionKind::Series { basis, theta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `R`, the length of the interacting interval.
    pub fn range(&self) -> f64 {
        self.range
    }

    /// `R + delta`, beyond which points do not interact.
    pub fn interaction_range(&self) -> f64 {
        self.range + self.delta
    }

    pub fn kind(&self) -> &InteractionKind {
        &self.kind
    }

    /// `phi(r)`.
    pub fn value(&self, r: f64) -> f64 {
        if let InteractionKind::Series { .. } = self.kind {
            return self.log_value(r).exp();
        }
        if r < self.delta {
            return 0.0;
        }
        if r > self.range + self.delta || matches!(self.kind, InteractionKind::Poisson) {
            return 1.0;
        }
        self.branch(r)
    }

    /// `g(r) = log phi(r)`, `-inf` inside the hard core.
    pub fn log_value(&self, r: f64) -> f64 {
        if r < self.delta {
            return f64::NEG_INFINITY;
        }
        if r > self.range + self.delta {
            return 0.0;
        }
        match &self.kind {
            InteractionKind::Poisson => 0.0,
            InteractionKind::Series { basis, theta } => basis.series_value(theta, r - self.delta),
            _ => self.branch(r).ln(),
        }
    }

    /// Value on the interacting interval `[delta, R + delta]`.
    fn branch(&self, r: f64) -> f64 {
        let t = (r - self.delta) / self.range;
        match &self.kind {
            InteractionKind::Poisson => 1.0,
            InteractionKind::Strauss { gamma } => *gamma,
            InteractionKind::DiggleGratton { alpha } => alpha + (1.0 - alpha) * t * t,
            InteractionKind::PiecewiseConstant { breaks, levels } => {
                let i = breaks.iter().position(|b| r <= *b).unwrap_or(levels.len() - 1);
                levels[i]
            }
            InteractionKind::Cubic { scaled } => {
                let s = r / (self.range + self.delta);
                ((scaled[0] * s + scaled[1]) * s + scaled[2]) * s + scaled[3]
            }
            InteractionKind::CosineMixture { eta, gamma } => {
                eta * (1.0 + (1.5 * std::f64::consts::PI * t).cos()) + (1.0 - eta) * t.powf(*gamma)
            }
            InteractionKind::Series { basis, theta } => basis.series_value(theta, r - self.delta).exp(),
        }
    }

    /// Supremum of `phi` over `[delta, R + delta]` on a fine grid plus the
    /// endpoints and any break points.
    pub fn sup_on_support(&self) -> f64 {
        if matches!(self.kind, InteractionKind::Poisson) {
            return 1.0;
        }
        let n = 4096;
        let lo = self.delta;
        let hi = self.delta + self.range;
        let mut sup = f64::NEG_INFINITY;
        for i in 0..=n {
            sup = sup.max(self.value(lo + (hi - lo) * i as f64 / n as f64));
        }
        if let InteractionKind::PiecewiseConstant { levels, .. } = &self.kind {
            sup = levels.iter().cloned().fold(sup, f64::max);
        }
        sup
    }

    /// Cubic coefficients `(a, b, c, d)` of `a r^3 + b r^2 + c r + d`.
    pub fn cubic_coefficients(&self) -> Option<[f64; 4]> {
        match &self.kind {
            InteractionKind::Cubic { scaled } => {
                let l = self.range + self.delta;
                Some([scaled[0] / l.powi(3), scaled[1] / l.powi(2), scaled[2] / l, scaled[3]])
            }
            _ => None,
        }
    }
}

fn solve_cubic(r: [f64; 4], v: [f64; 4], scale: f64) -> [f64; 4] {
    let mut m = Matrix4::zeros();
    for (i, ri) in r.iter().enumerate() {
        let s = ri / scale;
        m[(i, 0)] = s * s * s;
        m[(i, 1)] = s * s;
        m[(i, 2)] = s;
        m[(i, 3)] = 1.0;
    }
    let sol = m.lu().solve(&Vector4::from(v)).expect("distinct nodes give a regular system");
    [sol[0], sol[1], sol[2], sol[3]]
}

/// `log lambda(u, x) = theta_0 + sum_v g(|v - u|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsModel {
    pub log_activity: f64,
    pub interaction: InteractionFunction,
}

impl GibbsModel {
    pub fn new(log_activity: f64, interaction: InteractionFunction) -> Result<Self> {
        if !log_activity.is_finite() {
            return Err(Error::InvalidModel(format!("log activity {log_activity} is not finite")));
        }
        Ok(Self { log_activity, interaction })
    }

    pub fn with_beta(beta: f64, interaction: InteractionFunction) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidModel(format!("activity {beta} must be > 0")));
        }
        Self::new(beta.ln(), interaction)
    }

    pub fn beta(&self) -> f64 {
        self.log_activity.exp()
    }

    /// Log Papangelou conditional intensity at `u` given the indexed points,
    /// leaving out `exclude`. The index radius must cover `R + delta`.
    pub fn log_papangelou(&self, u: &Point, index: &NeighborIndex, exclude: Option<usize>) -> f64 {
        let f = &self.interaction;
        let reach = f.interaction_range();
        if reach == 0.0 {
            return self.log_activity;
        }
        debug_assert!(index.radius() >= reach);
        let mut acc = self.log_activity;
        index.for_each_within(u, 0.0, reach, |id, d| {
            if Some(id) != exclude {
                acc += f.log_value(d);
            }
        });
        acc
    }
}

/// `S_k(u, x \ exclude) = sum_v phi_k(|v - u| - delta)` over neighbours with
/// `delta <= |v - u| <= R + delta`, written to `out[k - 1]` for
/// `k = 1..=out.len()`.
pub fn suff_stats_into(
    basis: &BasisSystem,
    delta: f64,
    u: &Point,
    index: &NeighborIndex,
    exclude: Option<usize>,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let reach = delta + basis.range();
    let mut phi = [0.0; crate::basis::K_MAX];
    let k = out.len();
    index.for_each_within(u, delta, reach, |id, d| {
        if Some(id) == exclude {
            return;
        }
        basis.values_into(d - delta, &mut phi[..k]);
        for (o, p) in out.iter_mut().zip(&phi[..k]) {
            *o += p;
        }
    });
}

pub fn suff_stat(
    basis: &BasisSystem,
    k: usize,
    u: &Point,
    index: &NeighborIndex,
    delta: f64,
    exclude: Option<usize>,
) -> f64 {
    let mut out = vec![0.0; k];
    suff_stats_into(basis, delta, u, index, exclude, &mut out);
    out[k - 1]
}

/// True if some indexed point other than `exclude` lies strictly closer than
/// `delta` to `u`.
pub fn violates_hard_core(u: &Point, index: &NeighborIndex, delta: f64, exclude: Option<usize>) -> bool {
    if delta <= 0.0 {
        return false;
    }
    let mut hit = false;
    index.for_each_within(u, 0.0, delta, |id, d| {
        if d < delta && Some(id) != exclude {
            hit = true;
        }
    });
    hit
}

/// The four reference models with their activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceModel {
    Pif1,
    Pif2,
    Pif3,
    Pif4,
}

impl ReferenceModel {
    pub const ALL: [ReferenceModel; 4] =
        [ReferenceModel::Pif1, ReferenceModel::Pif2, ReferenceModel::Pif3, ReferenceModel::Pif4];

    pub fn interaction(&self) -> InteractionFunction {
        match self {
            ReferenceModel::Pif1 => InteractionFunction::pif1(),
            ReferenceModel::Pif2 => InteractionFunction::pif2(),
            ReferenceModel::Pif3 => InteractionFunction::pif3(),
            ReferenceModel::Pif4 => InteractionFunction::pif4(),
        }
    }

    /// Activity giving roughly 200 points per unit area.
    pub fn default_beta(&self) -> f64 {
        match self {
            ReferenceModel::Pif1 => 1827.0,
            ReferenceModel::Pif2 => 1240.0,
            ReferenceModel::Pif3 => 119.0,
            ReferenceModel::Pif4 => 1316.0,
        }
    }

    /// Published mean counts on `[0, l]^2` for `l = 1, 2, 3`.
    pub fn reference_counts(&self) -> [f64; 3] {
        match self {
            ReferenceModel::Pif1 => [183.0, 731.0, 1643.0],
            ReferenceModel::Pif2 => [190.0, 759.0, 1708.0],
            ReferenceModel::Pif3 => [182.0, 717.0, 1562.0],
            ReferenceModel::Pif4 => [217.0, 868.0, 1951.0],
        }
    }

    pub fn model(&self) -> GibbsModel {
        GibbsModel::with_beta(self.default_beta(), self.interaction()).expect("valid")
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceModel::Pif1 => "pif1",
            ReferenceModel::Pif2 => "pif2",
            ReferenceModel::Pif3 => "pif3",
            ReferenceModel::Pif4 => "pif4",
        }
    }
}

/// JSON model descriptor, e.g. `{"kind":"pif2","beta":1240}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelDescriptor {
    Pif1 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Pif2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Pif3 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Pif4 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Poisson {
        beta: f64,
    },
    Strauss {
        beta: f64,
        gamma: f64,
        #[serde(rename = "R")]
        range: f64,
        #[serde(default)]
        delta: f64,
    },
    Piecewise {
        beta: f64,
        #[serde(default)]
        delta: f64,
        breaks: Vec<f64>,
        levels: Vec<f64>,
    },
    Series {
        basis: BasisKind,
        #[serde(rename = "R")]
        range: f64,
        #[serde(default)]
        delta: f64,
        theta0: f64,
        theta: Vec<f64>,
    },
}

impl ModelDescriptor {
    pub fn reference(&self) -> Option<ReferenceModel> {
        match self {
            ModelDescriptor::Pif1 { .. } => Some(ReferenceModel::Pif1),
            ModelDescriptor::Pif2 { .. } => Some(ReferenceModel::Pif2),
            ModelDescriptor::Pif3 { .. } => Some(ReferenceModel::Pif3),
            ModelDescriptor::Pif4 { .. } => Some(ReferenceModel::Pif4),
            _ => None,
        }
    }

    pub fn to_model(&self) -> Result<GibbsModel> {
        match self {
            ModelDescriptor::Pif1 { beta }
            | ModelDescriptor::Pif2 { beta }
            | ModelDescriptor::Pif3 { beta }
            | ModelDescriptor::Pif4 { beta } => {
                let r = self.reference().expect("reference kind");
                GibbsModel::with_beta(beta.unwrap_or(r.default_beta()), r.interaction())
            }
            ModelDescriptor::Poisson { beta } => GibbsModel::with_beta(*beta, InteractionFunction::poisson()),
            ModelDescriptor::Strauss { beta, gamma, range, delta } => {
                GibbsModel::with_beta(*beta, InteractionFunction::strauss(*gamma, *range, *delta)?)
            }
            ModelDescriptor::Piecewise { beta, delta, breaks, levels } => {
                let range = breaks.last().copied().unwrap_or(0.0) - delta;
                let f = InteractionFunction::new(
                    *delta,
                    range,
                    InteractionKind::PiecewiseConstant { breaks: breaks.clone(), levels: levels.clone() },
                )?;
                GibbsModel::with_beta(*beta, f)
            }
            ModelDescriptor::Series { basis, range, delta, theta0, theta } => {
                let b = BasisSystem::new(*basis, *range)?;
                GibbsModel::new(*theta0, InteractionFunction::series(b, *delta, theta.clone())?)
            }
        }
    }
}
