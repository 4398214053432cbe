//! Browser bindings: reference interaction curves, MH simulation and the
//! cAIC-selected series fit. All results are JSON strings.

use gibbs_series::basis::{BasisKind, BasisSystem};
use gibbs_series::gibbs::ModelDescriptor;
use gibbs_series::inference::{select_k, SelectOptions};
use gibbs_series::pattern::{Point, PointPattern, Window};
use gibbs_series::simulate::{simulate, MhConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Res<T> = std::result::Result<T, String>;

fn model_from(name: &str) -> Res<gibbs_series::GibbsModel> {
    let d: ModelDescriptor = serde_json::from_value(json!({ "kind": name })).map_err(|e| e.to_string())?;
    d.to_model().map_err(|e| e.to_string())
}

fn basis_from(name: &str) -> Res<BasisKind> {
    serde_json::from_value(json!(name)).map_err(|_| format!("unknown basis '{name}'"))
}

#[derive(Serialize, Deserialize)]
pub struct PatternJson {
    pub window: [f64; 4],
    pub points: Vec<[f64; 2]>,
}

pub fn interaction_curve_json(model: &str, n: usize) -> Res<String> {
    let m = model_from(model)?;
    let f = &m.interaction;
    let reach = f.interaction_range();
    let top = if reach > 0.0 { 1.25 * reach } else { 0.1 };
    let r: Vec<f64> = (0..n).map(|i| top * (i as f64 + 0.5) / n as f64).collect();
    let phi: Vec<f64> = r.iter().map(|&x| f.value(x)).collect();
    Ok(json!({ "r": r, "phi": phi, "delta": f.delta(), "reach": reach, "beta": m.beta() }).to_string())
}

pub fn simulate_json(model: &str, side: f64, seed: u32) -> Res<String> {
    let m = model_from(model)?;
    let w = Window::square(side).map_err(|e| e.to_string())?;
    let cfg = MhConfig::for_model(&m, &w, seed as u64);
    let p = simulate(&m, &w, &cfg).map_err(|e| e.to_string())?;
    let out = PatternJson { window: w.as_array(), points: p.points().iter().map(|q| [q.x, q.y]).collect() };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn fit_json(pattern: &str, basis: &str, range: f64, delta: f64, k_max: usize) -> Res<String> {
    let pj: PatternJson = serde_json::from_str(pattern).map_err(|e| e.to_string())?;
    let [a, b, c, d] = pj.window;
    let w = Window::new(a, b, c, d).map_err(|e| e.to_string())?;
    let pts = pj.points.iter().map(|p| Point::new(p[0], p[1])).collect();
    let p = PointPattern::new(pts, w).map_err(|e| e.to_string())?;
    let basis = BasisSystem::new(basis_from(basis)?, range).map_err(|e| e.to_string())?;
    let opts = SelectOptions { k_max, grid_size: 200, ..SelectOptions::default() };
    let sel = select_k(&p, &basis, delta, &opts).map_err(|e| e.to_string())?;
    let trace: Vec<_> = sel
        .trace
        .rows
        .iter()
        .map(|t| json!({ "k": t.k, "lpl": t.lpl, "penalty": t.penalty, "caic": t.caic }))
        .collect();
    let c = &sel.curve;
    Ok(json!({
        "k": sel.chosen_k(),
        "n_data": sel.quadrature.n_data,
        "beta_hat": sel.fit.log_activity().exp(),
        "trace": trace,
        "r": c.r,
        "phi_hat": c.phi_hat,
        "phi_lo": c.phi_lo,
        "phi_hi": c.phi_hi,
    })
    .to_string())
}

/// `{r, phi, delta, reach, beta}` for a reference model (`pif1`..`pif4`).
#[wasm_bindgen]
pub fn interaction_curve(model: &str, n: usize) -> Result<String, JsError> {
    interaction_curve_json(model, n).map_err(|e| JsError::new(&e))
}

/// One MH draw on `[0, side]^2`: `{window, points}`.
#[wasm_bindgen]
pub fn simulate_pattern(model: &str, side: f64, seed: u32) -> Result<String, JsError> {
    simulate_json(model, side, seed).map_err(|e| JsError::new(&e))
}

/// cAIC-selected fit of a `{window, points}` pattern: chosen `k`, trace and
/// the estimated `phi` with pointwise 95% band.
#[wasm_bindgen]
pub fn fit_pattern(pattern: &str, basis: &str, range: f64, delta: f64, k_max: usize) -> Result<String, JsError> {
    fit_json(pattern, basis, range, delta, k_max).map_err(|e| JsError::new(&e))
}
