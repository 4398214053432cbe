//! Monte-Carlo experiment harness: simulate, optionally estimate the
//! irregular parameters, select the truncation level, and score the
//! estimate against the generating model.
//!
//! Replicate `i` on window `w` is simulated from ChaCha stream
//! `(w << 32) | i` of the spec seed, so results do not depend on scheduling.
//! All bases of one replicate share the same simulated pattern.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSystem};
use crate::error::{Error, Result};
use crate::gibbs::{GibbsModel, ModelDescriptor};
use crate::inference::{ise, normal_quantile, pointwise_se, relative_error_coefficients, select_k, SelectOptions};
use crate::io::{csv_err, fmt_raw, fmt_summary};
use crate::irregular::estimate_irregular;
use crate::pattern::{PointPattern, Window};
use crate::simulate::{replicate_rng, run_chain, MhConfig, BURN_IN_PER_UNIT_AREA, STEPS_PER_UNIT_AREA};

/// How `delta` and `R` are obtained for each fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IrregularPolicy {
    /// The generating model's values.
    Known,
    /// `delta` from the smallest distance (when `hardcore`), `R + delta` from
    /// the Ripley K deviation on `(0, r_max]`.
    Estimated {
        r_max: f64,
        #[serde(default = "default_true")]
        hardcore: bool,
        #[serde(default = "default_grid")]
        grid_size: usize,
    },
    /// True `delta`, `R + delta` replaced by `reach`.
    UpperBound { reach: f64 },
}

fn default_true() -> bool {
    true
}
fn default_grid() -> usize {
    512
}
fn default_k_max() -> usize {
    15
}
fn default_alpha() -> f64 {
    0.05
}
fn default_coverage() -> Vec<f64> {
    vec![0.035, 0.05]
}

/// Chain length overrides, per unit of simulated area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLength {
    pub steps_per_unit_area: f64,
    pub burn_in_per_unit_area: f64,
}

impl Default for ChainLength {
    fn default() -> Self {
        Self { steps_per_unit_area: STEPS_PER_UNIT_AREA, burn_in_per_unit_area: BURN_IN_PER_UNIT_AREA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelDescriptor,
    /// `[x_min, x_max, y_min, y_max]` per window.
    pub windows: Vec<[f64; 4]>,
    pub bases: Vec<BasisKind>,
    pub n_reps: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub seed: u64,
    #[serde(default = "known")]
    pub irregular: IrregularPolicy,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub nd: Option<usize>,
    /// Points of the curve grids (fit support and report grid).
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Distances at which band coverage of the true `g` is recorded.
    #[serde(default = "default_coverage")]
    pub coverage_r: Vec<f64>,
    #[serde(default)]
    pub chain: ChainLength,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn known() -> IrregularPolicy {
    IrregularPolicy::Known
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_reps < 1 {
            return bad("n_reps must be >= 1");
        }
        if self.k_max < 1 || self.k_max > crate::basis::K_MAX {
            return bad("k_max must be in 1..=32");
        }
        if self.windows.is_empty() {
            return bad("windows must be nonempty");
        }
        if self.bases.is_empty() {
            return bad("bases must be nonempty");
        }
        if self.grid_size < 2 {
            return bad("grid_size must be >= 2");
        }
        if !(self.chain.steps_per_unit_area > self.chain.burn_in_per_unit_area
            && self.chain.burn_in_per_unit_area >= 0.0)
        {
            return bad("chain steps must exceed burn-in");
        }
        normal_quantile(self.alpha)?;
        for w in &self.windows {
            Window::new(w[0], w[1], w[2], w[3])?;
        }
        match self.irregular {
            IrregularPolicy::Estimated { r_max, grid_size, .. } if !(r_max > 0.0) || grid_size < 4 => {
                return bad("estimated policy needs r_max > 0 and grid_size >= 4");
            }
            IrregularPolicy::UpperBound { reach } if !(reach > 0.0) => return bad("reach must be > 0"),
            _ => {}
        }
        self.model.to_model()?;
        Ok(())
    }

    pub fn model_name(&self) -> String {
        serde_json::to_value(&self.model)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
            .unwrap_or_else(|| "model".into())
    }

    fn mh_config(&self, model: &GibbsModel, window: &Window) -> MhConfig {
        let mut cfg = MhConfig::for_model(model, window, self.seed);
        let area = cfg.simulation_window(window).area();
        cfg.n_steps = (self.chain.steps_per_unit_area * area).round().max(1.0) as u64;
        cfg.burn_in = (self.chain.burn_in_per_unit_area * area).round() as u64;
        cfg
    }

    /// Upper end of the report grid for mean curves.
    fn report_reach(&self, model: &GibbsModel) -> f64 {
        match self.irregular {
            IrregularPolicy::Known => model.interaction.interaction_range(),
            IrregularPolicy::Estimated { r_max, .. } => r_max,
            IrregularPolicy::UpperBound { reach } => reach,
        }
    }
}

/// One (window, basis, replicate) outcome. Per-`K` vectors are indexed by
/// `K - 1`; `NaN` marks unavailable values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub window: usize,
    pub basis: BasisKind,
    pub rep: usize,
    pub error: Option<String>,
    pub n: usize,
    pub delta: f64,
    pub range: f64,
    pub k_hat: usize,
    pub theta0: f64,
    pub caic: f64,
    pub loss_caic: f64,
    /// 1, 0 or NaN per coverage distance.
    pub covered: Vec<f64>,
    pub ise: Vec<f64>,
    pub loss: Vec<f64>,
    /// Estimated `g` on the report grid (not written to the raw file).
    pub g_report: Vec<f64>,
}

impl ReplicateRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(window: usize, basis: BasisKind, rep: usize, n: usize, k_max: usize, n_cov: usize, msg: String) -> Self {
        Self {
            window,
            basis,
            rep,
            error: Some(msg),
            n,
            delta: f64::NAN,
            range: f64::NAN,
            k_hat: 0,
            theta0: f64::NAN,
            caic: f64::NAN,
            loss_caic: f64::NAN,
            covered: vec![f64::NAN; n_cov],
            ise: vec![f64::NAN; k_max],
            loss: vec![f64::NAN; k_max],
            g_report: Vec::new(),
        }
    }
}

/// Summary of one (window, basis) cell, computed from raw records only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub window: usize,
    pub basis: BasisKind,
    pub reps: usize,
    pub ok: usize,
    pub failed: usize,
    pub mean_n: f64,
    pub k_hat_mean: f64,
    pub k_hat_sd: f64,
    /// Minimiser of the mean ISE over replicates.
    pub k_mise: usize,
    pub loss_caic_mean: f64,
    pub loss_caic_sd: f64,
    pub loss_mise: f64,
    pub theta0_rmse: f64,
    pub coverage: Vec<f64>,
}

/// Pointwise Monte-Carlo mean and 2.5% / 97.5% envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCurves {
    pub window: usize,
    pub basis: BasisKind,
    pub r: Vec<f64>,
    pub g_mean: Vec<f64>,
    pub g_lo: Vec<f64>,
    pub g_hi: Vec<f64>,
    pub phi_mean: Vec<f64>,
    pub phi_lo: Vec<f64>,
    pub phi_hi: Vec<f64>,
    pub g_true: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<CellSummary>,
    pub curves: Vec<CellCurves>,
}

/// Fraction of failed replicates above which a run is reported as failed.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

impl ExperimentReport {
    pub fn failure_exceeded(&self) -> bool {
        self.summaries.iter().any(|s| s.failed as f64 > MAX_FAILURE_FRACTION * s.reps as f64)
    }

    pub fn summary(&self, window: usize, basis: BasisKind) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.window == window && s.basis == basis)
    }

    pub fn curves_for(&self, window: usize, basis: BasisKind) -> Option<&CellCurves> {
        self.curves.iter().find(|s| s.window == window && s.basis == basis)
    }

    pub fn records_for(&self, window: usize, basis: BasisKind) -> impl Iterator<Item = &ReplicateRecord> {
        self.records.iter().filter(move |r| r.window == window && r.basis == basis)
    }
}

/// Run the experiment with at most `jobs` worker threads (`None`: all cores).
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentReport> {
    spec.validate()?;
    let model = spec.model.to_model()?;
    let tasks: Vec<(usize, usize)> =
        (0..spec.windows.len()).flat_map(|w| (0..spec.n_reps).map(move |i| (w, i))).collect();
    let run = |&(w, i): &(usize, usize)| run_replicate(spec, &model, w, i);

    #[cfg(feature = "parallel")]
    let nested: Vec<Vec<ReplicateRecord>> = {
        use rayon::prelude::*;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j.max(1));
        }
        let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    #[cfg(not(feature = "parallel"))]
    let nested: Vec<Vec<ReplicateRecord>> = {
        let _ = jobs;
        tasks.iter().map(run).collect()
    };

    let mut records: Vec<ReplicateRecord> = nested.into_iter().flatten().collect();
    let order = |b: BasisKind| spec.bases.iter().position(|x| *x == b).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (r.window, order(r.basis), r.rep));

    let g_true = |r: f64| model.interaction.log_value(r);
    let reach = spec.report_reach(&model);
    let report_grid = midpoints(0.0, reach, spec.grid_size);
    let theta0_true = model.log_activity;
    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for w in 0..spec.windows.len() {
        for &b in &spec.bases {
            let cell: Vec<&ReplicateRecord> = records.iter().filter(|r| r.window == w && r.basis == b).collect();
            summaries.push(summarize(w, b, &cell, spec.k_max, spec.coverage_r.len(), theta0_true));
            curves.push(envelope(w, b, &cell, &report_grid, &g_true));
        }
    }
    Ok(ExperimentReport { spec: spec.clone(), records, summaries, curves })
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Simulate replicate `i` on window `w` and fit every basis.
pub fn run_replicate(spec: &ExperimentSpec, model: &GibbsModel, w: usize, i: usize) -> Vec<ReplicateRecord> {
    let [a, b, c, d] = spec.windows[w];
    let n_cov = spec.coverage_r.len();
    let fail_all = |n: usize, msg: String| {
        spec.bases
            .iter()
            .map(|&basis| ReplicateRecord::failed(w, basis, i, n, spec.k_max, n_cov, msg.clone()))
            .collect()
    };
    let window = match Window::new(a, b, c, d) {
        Ok(x) => x,
        Err(e) => return fail_all(0, e.to_string()),
    };
    let pattern = match simulate_for(spec, model, &window, w, i) {
        Ok(p) => p,
        Err(e) => return fail_all(0, e.to_string()),
    };
    let irregular = match spec.irregular {
        IrregularPolicy::Known => Ok((model.interaction.delta(), model.interaction.range())),
        IrregularPolicy::Estimated { r_max, hardcore, grid_size } => {
            estimate_irregular(&pattern, hardcore, r_max, grid_size)
        }
        IrregularPolicy::UpperBound { reach } => {
            let delta = model.interaction.delta();
            if reach > delta {
                Ok((delta, reach - delta))
            } else {
                Err(Error::InvalidConfig("reach must exceed delta".into()))
            }
        }
    };
    let (delta, range) = match irregular {
        Ok(x) => x,
        Err(e) => return fail_all(pattern.len(), e.to_string()),
    };
    let report_grid = midpoints(0.0, spec.report_reach(model), spec.grid_size);
    spec.bases
        .iter()
        .map(|&basis| {
            fit_one(spec, model, &pattern, basis, delta, range, &report_grid).unwrap_or_else(|e| {
                ReplicateRecord::failed(w, basis, i, pattern.len(), spec.k_max, n_cov, e.to_string())
            })
        })
        .map(|mut r| {
            r.window = w;
            r.rep = i;
            r
        })
        .collect()
}

/// The pattern used by replicate `i` on window `w`.
pub fn simulate_for(
    spec: &ExperimentSpec,
    model: &GibbsModel,
    window: &Window,
    w: usize,
    i: usize,
) -> Result<PointPattern> {
    let cfg = spec.mh_config(model, window);
    let mut rng = replicate_rng(cfg.seed, ((w as u64) << 32) | i as u64);
    let sim = cfg.simulation_window(window);
    let mut points = run_chain(model, &sim, &cfg, &mut rng, |_| {})?;
    points.retain(|p| window.contains(p));
    PointPattern::new(points, *window)
}

fn fit_one(
    spec: &ExperimentSpec,
    model: &GibbsModel,
    pattern: &PointPattern,
    basis_kind: BasisKind,
    delta: f64,
    range: f64,
    report_grid: &[f64],
) -> Result<ReplicateRecord> {
    let basis = BasisSystem::new(basis_kind, range)?;
    let opts = SelectOptions {
        k_max: spec.k_max,
        nd: spec.nd,
        alpha: spec.alpha,
        grid_size: spec.grid_size,
        ..SelectOptions::default()
    };
    let sel = select_k(pattern, &basis, delta, &opts)?;
    let g_true = |r: f64| model.interaction.log_value(r);

    let mut ise_k = vec![f64::NAN; spec.k_max];
    let mut loss_k = vec![f64::NAN; spec.k_max];
    for fit in &sel.fits {
        if !fit.converged {
            continue;
        }
        let e = ise(&basis, fit.coefficients(), g_true, delta);
        let l =
            relative_error_coefficients(&basis, fit.coefficients(), &g_true, delta, spec.grid_size).unwrap_or(f64::NAN);
        ise_k[fit.k - 1] = if e.is_finite() { e } else { f64::NAN };
        loss_k[fit.k - 1] = if l.is_finite() { l } else { f64::NAN };
    }

    let z = normal_quantile(spec.alpha)?;
    let theta = sel.fit.coefficients();
    let covered = spec
        .coverage_r
        .iter()
        .map(|&r| {
            if r < delta || r > delta + range {
                return Ok(f64::NAN);
            }
            let g = basis.reconstruct(theta, delta, r)?;
            let se = pointwise_se(&sel.vcov, &basis, delta, r)?;
            let t = g_true(r);
            Ok(if !t.is_finite() { f64::NAN } else { f64::from((g - t).abs() <= z * se) })
        })
        .collect::<Result<Vec<f64>>>()?;

    let g_report = report_grid
        .iter()
        .map(|&r| {
            if r < delta {
                f64::NEG_INFINITY
            } else if r > delta + range {
                0.0
            } else {
                basis.series_value(theta, r - delta)
            }
        })
        .collect();

    let k = sel.chosen_k();
    Ok(ReplicateRecord {
        window: 0,
        basis: basis_kind,
        rep: 0,
        error: None,
        n: pattern.len(),
        delta,
        range,
        k_hat: k,
        theta0: sel.fit.log_activity(),
        caic: sel.trace.rows[k - 1].caic,
        loss_caic: loss_k[k - 1],
        covered,
        ise: ise_k,
        loss: loss_k,
        g_report,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation; 0 for a single value.
fn sd(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            let m = mean(v);
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
        }
    }
}

fn finite(v: impl Iterator<Item = f64>) -> Vec<f64> {
    v.filter(|x| x.is_finite()).collect()
}

/// Aggregates over the successful records of one cell.
pub fn summarize(
    window: usize,
    basis: BasisKind,
    cell: &[&ReplicateRecord],
    k_max: usize,
    n_cov: usize,
    theta0_true: f64,
) -> CellSummary {
    let ok: Vec<&ReplicateRecord> = cell.iter().copied().filter(|r| r.ok()).collect();
    let ks: Vec<f64> = ok.iter().map(|r| r.k_hat as f64).collect();
    let losses = finite(ok.iter().map(|r| r.loss_caic));
    let mise: Vec<f64> = (0..k_max).map(|k| mean(&finite(ok.iter().map(|r| r.ise[k])))).collect();
    let mut k_mise = 0;
    for (k, m) in mise.iter().enumerate() {
        if m.is_finite() && (k_mise == 0 || *m < mise[k_mise - 1]) {
            k_mise = k + 1;
        }
    }
    let loss_mise = if k_mise > 0 { mean(&finite(ok.iter().map(|r| r.loss[k_mise - 1]))) } else { f64::NAN };
    let sq: Vec<f64> = finite(ok.iter().map(|r| (r.theta0 - theta0_true).powi(2)));
    CellSummary {
        window,
        basis,
        reps: cell.len(),
        ok: ok.len(),
        failed: cell.len() - ok.len(),
        mean_n: mean(&ok.iter().map(|r| r.n as f64).collect::<Vec<_>>()),
        k_hat_mean: mean(&ks),
        k_hat_sd: sd(&ks),
        k_mise,
        loss_caic_mean: mean(&losses),
        loss_caic_sd: sd(&losses),
        loss_mise,
        theta0_rmse: mean(&sq).sqrt(),
        coverage: (0..n_cov).map(|j| mean(&finite(ok.iter().map(|r| r.covered[j])))).collect(),
    }
}

/// Linear-interpolation quantile of sorted values; infinite neighbours are
/// not interpolated.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b || !(a.is_finite() && b.is_finite()) {
        a
    } else {
        a + (pos - lo as f64) * (b - a)
    }
}

fn envelope<G: Fn(f64) -> f64>(
    window: usize,
    basis: BasisKind,
    cell: &[&ReplicateRecord],
    grid: &[f64],
    g_true: &G,
) -> CellCurves {
    let ok: Vec<&ReplicateRecord> = cell.iter().copied().filter(|r| r.ok()).collect();
    let mut c = CellCurves {
        window,
        basis,
        r: grid.to_vec(),
        g_mean: Vec::new(),
        g_lo: Vec::new(),
        g_hi: Vec::new(),
        phi_mean: Vec::new(),
        phi_lo: Vec::new(),
        phi_hi: Vec::new(),
        g_true: grid.iter().map(|r| g_true(*r)).collect(),
    };
    for j in 0..grid.len() {
        let mut g: Vec<f64> = ok.iter().map(|r| r.g_report[j]).collect();
        let mut phi: Vec<f64> = g.iter().map(|x| x.exp()).collect();
        g.sort_by(f64::total_cmp);
        phi.sort_by(f64::total_cmp);
        c.g_mean.push(if g.contains(&f64::NEG_INFINITY) { f64::NEG_INFINITY } else { mean(&g) });
        c.g_lo.push(quantile(&g, 0.025));
        c.g_hi.push(quantile(&g, 0.975));
        c.phi_mean.push(mean(&phi));
        c.phi_lo.push(quantile(&phi, 0.025));
        c.phi_hi.push(quantile(&phi, 0.975));
    }
    c
}

fn window_label(w: usize) -> String {
    format!("W{}", w + 1)
}

fn cov_label(r: f64) -> String {
    format!("cover_{r}")
}

pub fn write_raw<W: std::io::Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let spec = &report.spec;
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "model",
        "window",
        "x_min",
        "x_max",
        "y_min",
        "y_max",
        "basis",
        "rep",
        "status",
        "error",
        "n",
        "delta",
        "R",
        "K_hat",
        "theta0",
        "caic",
        "loss_caic",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(spec.coverage_r.iter().map(|r| cov_label(*r)));
    header.extend((1..=spec.k_max).map(|k| format!("ise_{k}")));
    header.extend((1..=spec.k_max).map(|k| format!("loss_{k}")));
    wr.write_record(&header).map_err(csv_err)?;
    let name = spec.model_name();
    for r in &report.records {
        let w = spec.windows[r.window];
        let mut row = vec![name.clone(), window_label(r.window)];
        row.extend(w.iter().map(|v| fmt_raw(*v)));
        row.push(r.basis.name().into());
        row.push(r.rep.to_string());
        row.push(if r.ok() { "ok".into() } else { "failed".into() });
        row.push(r.error.clone().unwrap_or_default());
        row.push(r.n.to_string());
        row.push(fmt_raw(r.delta));
        row.push(fmt_raw(r.range));
        row.push(r.k_hat.to_string());
        row.push(fmt_raw(r.theta0));
        row.push(fmt_raw(r.caic));
        row.push(fmt_raw(r.loss_caic));
        row.extend(r.covered.iter().map(|v| fmt_raw(*v)));
        row.extend(r.ise.iter().map(|v| fmt_raw(*v)));
        row.extend(r.loss.iter().map(|v| fmt_raw(*v)));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_aggregate<W: std::io::Write>(out: W, report: &ExperimentReport) -> Result<()> {
    let spec = &report.spec;
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "model",
        "window",
        "basis",
        "reps",
        "ok",
        "failed",
        "mean_n",
        "K_hat_mean",
        "K_hat_sd",
        "K_mise",
        "loss_caic_mean",
        "loss_caic_sd",
        "loss_mise",
        "theta0_rmse",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(spec.coverage_r.iter().map(|r| format!("coverage_{r}")));
    wr.write_record(&header).map_err(csv_err)?;
    let name = spec.model_name();
    for s in &report.summaries {
        let mut row = vec![
            name.clone(),
            window_label(s.window),
            s.basis.name().into(),
            s.reps.to_string(),
            s.ok.to_string(),
            s.failed.to_string(),
            fmt_summary(s.mean_n),
            fmt_summary(s.k_hat_mean),
            fmt_summary(s.k_hat_sd),
            s.k_mise.to_string(),
            fmt_summary(s.loss_caic_mean),
            fmt_summary(s.loss_caic_sd),
            fmt_summary(s.loss_mise),
            fmt_summary(s.theta0_rmse),
        ];
        row.extend(s.coverage.iter().map(|v| fmt_summary(*v)));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_curves<W: std::io::Write>(out: W, c: &CellCurves) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["r", "g_mean", "g_lo", "g_hi", "phi_mean", "phi_lo", "phi_hi", "g_true", "phi_true"])
        .map_err(csv_err)?;
    for j in 0..c.r.len() {
        let row = [
            c.r[j],
            c.g_mean[j],
            c.g_lo[j],
            c.g_hi[j],
            c.phi_mean[j],
            c.phi_lo[j],
            c.phi_hi[j],
            c.g_true[j],
            c.g_true[j].exp(),
        ];
        wr.write_record(row.iter().map(|v| fmt_raw(*v))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Write `raw.csv`, `aggregate.csv` and one `curves_<window>_<basis>.csv`
/// per cell into `dir`; returns the file names in write order.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let raw = dir.join("raw.csv");
    write_raw(fs::File::create(&raw)?, report)?;
    files.push(raw);
    let agg = dir.join("aggregate.csv");
    write_aggregate(fs::File::create(&agg)?, report)?;
    files.push(agg);
    for c in &report.curves {
        let p = dir.join(format!("curves_{}_{}.csv", window_label(c.window), c.basis.name()));
        write_curves(fs::File::create(&p)?, c)?;
        files.push(p);
    }
    Ok(files)
}
