//! Command-line front end: `simulate | fit | experiment | kest`.
//!
//! Exit codes: 0 success, 1 numerical failure (no converged fit, too many
//! failed replicates), 2 invalid configuration or input, 3 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gibbs_series::basis::{BasisKind, BasisSystem};
use gibbs_series::error::Error;
use gibbs_series::experiment::{run_experiment, write_report, ExperimentSpec};
use gibbs_series::fit::FitResult;
use gibbs_series::gibbs::ModelDescriptor;
use gibbs_series::inference::{select_k, SelectOptions, VcovPair};
use gibbs_series::io::{matrix_rows, read_pattern, write_curve, write_k_function, write_pattern, write_trace};
use gibbs_series::irregular::{argmax_deviation, estimate_delta, range_grid, ripley_k};
use gibbs_series::pattern::{PointPattern, Window};
use gibbs_series::simulate::{simulate_batch, MhConfig, BURN_IN_PER_UNIT_AREA, STEPS_PER_UNIT_AREA};

#[derive(Parser)]
#[command(name = "gibbs-series", version, about = "Orthogonal series estimation of pairwise interaction functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicates of a pairwise interaction process.
    Simulate(SimulateArgs),
    /// Fit a pattern and select the truncation level by cAIC.
    Fit(FitArgs),
    /// Run a Monte-Carlo experiment from a JSON spec.
    Experiment(ExperimentArgs),
    /// Border-corrected Ripley K and the range estimate.
    Kest(KestArgs),
}

#[derive(Args)]
struct WindowArg {
    /// Observation window.
    #[arg(long, num_args = 4, value_names = ["X0", "X1", "Y0", "Y1"], allow_negative_numbers = true)]
    window: Option<Vec<f64>>,
}

impl WindowArg {
    fn get(&self) -> Result<Option<Window>, Error> {
        self.window.as_ref().map(|w| Window::new(w[0], w[1], w[2], w[3])).transpose()
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Model descriptor: a JSON file, inline JSON, or one of pif1..pif4.
    #[arg(long)]
    model: String,
    #[command(flatten)]
    window: WindowArg,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Chain steps per unit of simulated area.
    #[arg(long)]
    steps_per_area: Option<f64>,
    /// Dilation of the simulation window; 0 gives a free boundary on W.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// Pattern CSV with header `x,y`.
    pattern: PathBuf,
    #[command(flatten)]
    window: WindowArg,
    #[arg(long, default_value = "fourier-bessel")]
    basis: BasisKind,
    /// Hard core: `none`, `estimate`, or a value.
    #[arg(long, default_value = "none")]
    delta: String,
    /// Interaction range R (support of the series is [delta, R + delta]).
    #[arg(long, conflicts_with = "range_max")]
    range: Option<f64>,
    /// Estimate R + delta from the K function on (0, range_max].
    #[arg(long)]
    range_max: Option<f64>,
    #[arg(long, default_value_t = 15)]
    kmax: usize,
    /// Side of the dummy-point grid.
    #[arg(long)]
    nd: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Points of the curve grid.
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    spec: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides `output_dir` in the spec.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KestArgs {
    pattern: PathBuf,
    #[command(flatten)]
    window: WindowArg,
    #[arg(long)]
    rmax: f64,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::NotConverged | Error::SingularSensitivity | Error::SingularPhi { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Kest(a) => cmd_kest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_json(path: &Path, v: &Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Manifest with the exact arguments, so the run can be repeated.
fn manifest(command: &str, config: Value, outputs: &[PathBuf]) -> Value {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<String> =
        outputs.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    json!({
        "tool": "gibbs-series",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "config": config,
        "outputs": names,
    })
}

fn parse_model(arg: &str) -> Result<ModelDescriptor, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else if matches!(arg, "pif1" | "pif2" | "pif3" | "pif4") {
        format!("{{\"kind\":\"{arg}\"}}")
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::from(Error::from(e)))?
    };
    serde_json::from_str(&text).map_err(|e| invalid(format!("model descriptor: {e}")))
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    if a.reps == 0 {
        return Err(invalid("--reps must be >= 1"));
    }
    let window = a.window.get()?.ok_or_else(|| invalid("--window is required"))?;
    let desc = parse_model(&a.model)?;
    let model = desc.to_model()?;
    let mut cfg = MhConfig::for_model(&model, &window, a.seed);
    if let Some(m) = a.margin {
        cfg.margin = m;
    }
    let steps = a.steps_per_area.unwrap_or(STEPS_PER_UNIT_AREA);
    let area = cfg.simulation_window(&window).area();
    cfg.n_steps = (steps * area).round().max(1.0) as u64;
    cfg.burn_in = (steps * area * BURN_IN_PER_UNIT_AREA / STEPS_PER_UNIT_AREA).round() as u64;
    cfg.validate()?;
    let patterns = simulate_batch(&model, &window, &cfg, a.reps)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let width = (a.reps - 1).to_string().len().max(3);
    let mut outputs = Vec::new();
    for (i, p) in patterns.iter().enumerate() {
        let path = a.out.join(format!("rep_{i:0width$}.csv"));
        write_pattern(&path, p)?;
        outputs.push(path.clone());
        outputs.push(path.with_extension("window.json"));
    }
    let counts: Vec<usize> = patterns.iter().map(PointPattern::len).collect();
    let config = json!({
        "model": desc,
        "window": window.as_array(),
        "seed": a.seed,
        "reps": a.reps,
        "streams": (0..a.reps).collect::<Vec<_>>(),
        "mh": cfg,
        "counts": counts,
    });
    let mpath = a.out.join("manifest.json");
    outputs.push(mpath.clone());
    write_json(&mpath, &manifest("simulate", config, &outputs))?;
    Ok(())
}

fn fit_json(fit: &FitResult, vcov: Option<&VcovPair>, basis: BasisKind, delta: f64, range: f64) -> Value {
    json!({
        "basis": basis,
        "delta": delta,
        "R": range,
        "K": fit.k,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
        "theta0": fit.log_activity(),
        "theta": fit.coefficients(),
        "lpl": fit.lpl,
        "A_hat": vcov.map(|v| matrix_rows(&v.a_hat)),
        "B_hat": vcov.map(|v| matrix_rows(&v.b_hat)),
        "area_eroded": fit.quadrature.area,
        "quadrature": fit.quadrature,
    })
}

fn cmd_fit(a: &FitArgs) -> CmdResult {
    let window = a.window.get()?;
    let pattern = read_pattern(&a.pattern, window)?;
    if a.kmax < 1 {
        return Err(invalid("--kmax must be >= 1"));
    }
    let delta = match a.delta.as_str() {
        "none" => 0.0,
        "estimate" => estimate_delta(&pattern)?,
        v => v
            .parse::<f64>()
            .ok()
            .filter(|d| *d >= 0.0 && d.is_finite())
            .ok_or_else(|| invalid(format!("--delta: expected none, estimate or a value >= 0, got '{v}'")))?,
    };
    let (range, reach_estimate) = match (a.range, a.range_max) {
        (Some(r), None) => (r, None),
        (None, Some(r_max)) => {
            let grid = range_grid(r_max, a.grid);
            let k = ripley_k(&pattern, &grid)?;
            let reach = argmax_deviation(&k.r, &k.k_hat)?;
            ((reach - delta).max(4.0 * r_max / a.grid as f64), Some(reach))
        }
        _ => return Err(invalid("one of --range or --range-max is required")),
    };
    let basis = BasisSystem::new(a.basis, range)?;
    let opts = SelectOptions { k_max: a.kmax, nd: a.nd, alpha: a.alpha, grid_size: a.grid, ..SelectOptions::default() };

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let config = json!({
        "pattern": a.pattern,
        "window": pattern.window().as_array(),
        "n": pattern.len(),
        "basis": a.basis,
        "delta": delta,
        "R": range,
        "reach_estimate": reach_estimate,
        "kmax": a.kmax,
        "nd": a.nd,
        "alpha": a.alpha,
        "grid": a.grid,
    });
    let fit_path = a.out.join("fit.json");
    let mpath = a.out.join("manifest.json");
    match select_k(&pattern, &basis, delta, &opts) {
        Ok(sel) => {
            let trace_path = a.out.join("trace.csv");
            let curve_path = a.out.join("curve.csv");
            write_trace(fs::File::create(&trace_path).map_err(Error::from)?, &sel.trace)?;
            write_curve(fs::File::create(&curve_path).map_err(Error::from)?, &sel.curve)?;
            write_json(&fit_path, &fit_json(&sel.fit, Some(&sel.vcov), a.basis, delta, range))?;
            let outputs = [trace_path, fit_path, curve_path, mpath.clone()];
            write_json(&mpath, &manifest("fit", config, &outputs))?;
            Ok(())
        }
        Err(e @ (Error::NotConverged | Error::SingularSensitivity | Error::SingularPhi { .. })) => {
            write_json(&fit_path, &json!({ "converged": false, "error": e.to_string() }))?;
            write_json(&mpath, &manifest("fit", config, &[fit_path, mpath.clone()]))?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_experiment(a: &ExperimentArgs) -> CmdResult {
    let text = fs::read_to_string(&a.spec).map_err(Error::from)?;
    let mut spec: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("spec: {e}")))?;
    if let Some(obj) = spec.as_object_mut() {
        obj.insert("seed".into(), json!(a.seed));
    }
    let spec = ExperimentSpec::from_json(&spec.to_string())?;
    let out = a
        .out
        .clone()
        .or_else(|| spec.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| invalid("no output directory: pass --out or set output_dir"))?;
    if a.jobs == Some(0) {
        return Err(invalid("--jobs must be >= 1"));
    }
    let report = run_experiment(&spec, a.jobs)?;
    let mut outputs = write_report(&out, &report)?;
    let failures: Vec<String> = report
        .records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("W{} {} rep {}: {e}", r.window + 1, r.basis, r.rep)))
        .collect();
    for f in &failures {
        eprintln!("replicate failed: {f}");
    }
    let mpath = out.join("manifest.json");
    outputs.push(mpath.clone());
    let config = json!({ "spec": spec, "failed_replicates": failures.len() });
    write_json(&mpath, &manifest("experiment", config, &outputs))?;
    if report.failure_exceeded() {
        return Err(Failure {
            code: 1,
            message: format!("{} replicates failed (more than 10% in some cell)", failures.len()),
        });
    }
    Ok(())
}

fn cmd_kest(a: &KestArgs) -> CmdResult {
    let window = a.window.get()?;
    let pattern = read_pattern(&a.pattern, window)?;
    if a.grid == 0 || !(a.rmax > 0.0) {
        return Err(invalid("--rmax must be > 0 and --grid >= 1"));
    }
    let grid = range_grid(a.rmax, a.grid);
    let k = ripley_k(&pattern, &grid)?;
    let reach = argmax_deviation(&k.r, &k.k_hat)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let kpath = a.out.join("k.csv");
    write_k_function(fs::File::create(&kpath).map_err(Error::from)?, &k)?;
    let result = json!({ "range_estimate": reach, "r_max": a.rmax, "grid": a.grid, "n": pattern.len() });
    let rpath = a.out.join("range.json");
    write_json(&rpath, &result)?;
    let mpath = a.out.join("manifest.json");
    let config = json!({ "pattern": a.pattern, "window": pattern.window().as_array(), "rmax": a.rmax, "grid": a.grid });
    write_json(&mpath, &manifest("kest", config, &[kpath, rpath, mpath.clone()]))?;
    println!("{}", serde_json::to_string(&result).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(())
}
