import init, { interaction_curve, simulate_pattern, fit_pattern } from "./pkg/gibbs_series_web.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

let pattern = null;
let truth = null;

function drawPattern(p) {
  const c = $("pattern");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const [x0, x1, y0, y1] = p.window;
  const s = Math.min((c.width - 20) / (x1 - x0), (c.height - 20) / (y1 - y0));
  ctx.strokeRect(10, 10, (x1 - x0) * s, (y1 - y0) * s);
  ctx.fillStyle = "#224";
  for (const [x, y] of p.points) {
    ctx.beginPath();
    ctx.arc(10 + (x - x0) * s, 10 + (y1 - y) * s, 1.8, 0, 2 * Math.PI);
    ctx.fill();
  }
}

// Plots phi on [0, rmax] x [0, ymax]; series are {r, y, color, dash?}.
function drawCurves(series, rmax) {
  const c = $("curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 40;
  const w = c.width - 2 * pad, h = c.height - 2 * pad;
  let ymax = 1.5;
  for (const s of series) for (const v of s.y) if (Number.isFinite(v)) ymax = Math.max(ymax, Math.min(v, 4));
  const X = (r) => pad + (r / rmax) * w;
  const Y = (v) => pad + h - (Math.min(Math.max(v, 0), ymax) / ymax) * h;

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.setLineDash([2, 3]);
  ctx.beginPath(); ctx.moveTo(pad, Y(1)); ctx.lineTo(pad + w, Y(1)); ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#333";
  ctx.fillText("0", pad - 10, pad + h + 14);
  ctx.fillText(rmax.toFixed(3), pad + w - 20, pad + h + 14);
  ctx.fillText("1", pad - 14, Y(1) + 4);
  ctx.fillText(ymax.toFixed(1), pad - 26, pad + 4);
  ctx.fillText("r", pad + w / 2, pad + h + 28);
  ctx.fillText("φ(r)", 4, pad + h / 2);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    let started = false;
    s.r.forEach((r, i) => {
      const v = s.y[i];
      if (!Number.isFinite(v) || r > rmax) { started = false; return; }
      if (started) ctx.lineTo(X(r), Y(v)); else { ctx.moveTo(X(r), Y(v)); started = true; }
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function showTruth() {
  truth = JSON.parse(interaction_curve($("model").value, 400));
  $("delta").value = truth.delta;
  $("range").value = +(truth.reach - truth.delta).toFixed(4);
  drawCurves([{ r: truth.r, y: truth.phi, color: "#c33" }], truth.r[truth.r.length - 1]);
  status(`${$("model").value}: beta = ${truth.beta}, hard core ${truth.delta}, interaction range ${truth.reach}`);
}

function runSimulation() {
  status("Simulating...");
  setTimeout(() => {
    const t = performance.now();
    pattern = JSON.parse(simulate_pattern($("model").value, +$("side").value, +$("seed").value >>> 0));
    drawPattern(pattern);
    $("fit").disabled = false;
    status(`${pattern.points.length} points in ${((performance.now() - t) / 1000).toFixed(2)} s`);
  }, 10);
}

function runFit() {
  status("Fitting...");
  setTimeout(() => {
    const t = performance.now();
    let fit;
    try {
      fit = JSON.parse(fit_pattern(JSON.stringify(pattern), $("basis").value, +$("range").value, +$("delta").value, +$("kmax").value));
    } catch (e) {
      status(`Fit failed: ${e.message || e}`);
      return;
    }
    const rmax = Math.max(fit.r[fit.r.length - 1], truth ? truth.r[truth.r.length - 1] : 0);
    const series = [
      { r: fit.r, y: fit.phi_lo, color: "#88a", dash: [4, 3] },
      { r: fit.r, y: fit.phi_hi, color: "#88a", dash: [4, 3] },
      { r: fit.r, y: fit.phi_hat, color: "#226" },
    ];
    if (truth) series.unshift({ r: truth.r, y: truth.phi, color: "#c33" });
    drawCurves(series, rmax);
    const rows = fit.trace.map((t) =>
      `<tr class="${t.k === fit.k ? "chosen" : ""}"><td>${t.k}</td><td>${t.lpl.toFixed(2)}</td><td>${t.penalty.toFixed(2)}</td><td>${t.caic.toFixed(2)}</td></tr>`);
    $("trace").innerHTML = `<table><tr><th>K</th><th>LPL</th><th>penalty</th><th>cAIC</th></tr>${rows.join("")}</table>`;
    status(`K = ${fit.k} by cAIC, ${fit.n_data} points in the eroded window, ${((performance.now() - t) / 1000).toFixed(2)} s. Red: truth; blue: estimate with 95% band.`);
  }, 10);
}

await init();
$("show").onclick = showTruth;
$("model").onchange = showTruth;
$("simulate").onclick = runSimulation;
$("fit").onclick = runFit;
showTruth();
