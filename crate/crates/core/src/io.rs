//! File formats: point patterns as `x,y` CSV with a JSON window sidecar, and
//! CSV writers for curves, selection traces and K functions.
//!
//! Raw numbers are written with 17 significant digits so that files
//! round-trip exactly; summary tables use 6.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{CurveEstimate, SelectionTrace};
use crate::irregular::KFunctionEstimate;
use crate::pattern::{Point, PointPattern, Window};

/// 17 significant digits, scientific notation.
pub fn fmt_raw(x: f64) -> String {
    format!("{x:.16e}")
}

/// 6 significant digits; plain notation for moderate magnitudes.
pub fn fmt_summary(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSidecar {
    pub window: [f64; 4],
}

impl WindowSidecar {
    pub fn to_window(&self) -> Result<Window> {
        let [a, b, c, d] = self.window;
        Window::new(a, b, c, d)
    }
}

/// `pattern.csv` -> `pattern.window.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("window.json")
}

pub fn read_window_sidecar(path: &Path) -> Result<Window> {
    let text = fs::read_to_string(path)?;
    let sc: WindowSidecar =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    sc.to_window()
}

pub fn write_window_sidecar(path: &Path, window: &Window) -> Result<()> {
    let sc = WindowSidecar { window: window.as_array() };
    let text = serde_json::to_string(&sc).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Points from `x,y` CSV text.
pub fn parse_points<R: Read>(reader: R) -> Result<Vec<Point>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["x", "y"] {
        return Err(Error::Parse(format!("expected header x,y, found {}", cols.join(","))));
    }
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number '{s}'", line + 2)))
        };
        points.push(Point::new(field(0)?, field(1)?));
    }
    Ok(points)
}

/// Read a pattern; the window is taken from `window` or else from the
/// sidecar next to the CSV.
pub fn read_pattern(path: &Path, window: Option<Window>) -> Result<PointPattern> {
    let window = match window {
        Some(w) => w,
        None => {
            let sc = sidecar_path(path);
            if !sc.exists() {
                return Err(Error::InvalidConfig(format!("no window given and no sidecar {}", sc.display())));
            }
            read_window_sidecar(&sc)?
        }
    };
    let file = fs::File::open(path)?;
    PointPattern::new(parse_points(file)?, window)
}

pub fn write_points<W: Write>(out: W, points: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for p in points {
        w.write_record([fmt_raw(p.x), fmt_raw(p.y)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Pattern CSV plus its window sidecar.
pub fn write_pattern(path: &Path, pattern: &PointPattern) -> Result<()> {
    write_points(fs::File::create(path)?, pattern.points())?;
    write_window_sidecar(&sidecar_path(path), pattern.window())
}

pub fn write_curve<W: Write>(out: W, c: &CurveEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "g_hat", "se", "g_lo", "g_hi", "phi_hat", "phi_lo", "phi_hi"]).map_err(csv_err)?;
    for i in 0..c.len() {
        let row = [c.r[i], c.g_hat[i], c.se[i], c.g_lo[i], c.g_hi[i], c.phi_hat[i], c.phi_lo[i], c.phi_hi[i]];
        w.write_record(row.iter().map(|v| fmt_raw(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, t: &SelectionTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["K", "lpl", "penalty", "caic", "chosen"]).map_err(csv_err)?;
    for row in &t.rows {
        w.write_record([
            row.k.to_string(),
            fmt_raw(row.lpl),
            fmt_raw(row.penalty),
            fmt_raw(row.caic),
            u8::from(row.k == t.chosen).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_k_function<W: Write>(out: W, k: &KFunctionEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "K_hat", "K_pois"]).map_err(csv_err)?;
    for ((r, kh), kp) in k.r.iter().zip(&k.k_hat).zip(k.k_poisson()) {
        w.write_record([fmt_raw(*r), fmt_raw(*kh), fmt_raw(kp)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::from(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Row-major nested vectors, for JSON output.
pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
