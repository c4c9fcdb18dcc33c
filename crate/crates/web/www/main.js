// Build first: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { exponents, criterion, solve_curve, cutoff_profiles } from "./pkg/heatlab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const report = $("report");

function problem() {
  return JSON.stringify({
    dim: num("dim"), alpha: num("alpha"), p: num("p"),
    r_max: num("rmax"), t_end: num("tend"),
    forcing: { family: "constant", value: num("a") },
    w: { family: "gaussian", amplitude: num("wamp"), width: 1 },
    u0: { family: "zero" },
  });
}

function show(obj) {
  report.classList.remove("err");
  report.textContent = typeof obj === "string" ? obj : JSON.stringify(obj, null, 2);
}

function fail(e) {
  report.classList.add("err");
  report.textContent = String(e);
}

// series: [{xs, ys, color, label}]
function plot(canvas, series, { logY = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tf = (y) => (logY ? Math.log10(Math.max(y, 1e-300)) : y);
  const xs = series.flatMap((s) => s.xs);
  const ys = series.flatMap((s) => s.ys.map(tf)).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((tf(y) - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);
  ctx.fillText((logY ? "1e" : "") + y1.toPrecision(3), 2, pad + 4);
  ctx.fillText((logY ? "1e" : "") + y0.toPrecision(3), 2, h - pad);
  ctx.fillText(xLabel, w / 2, h - 8);
  ctx.fillText(yLabel, pad + 4, pad - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 120, pad + 14 + 14 * k);
  });
}

function onCriterion() {
  try {
    const exps = JSON.parse(exponents(num("dim"), num("alpha")));
    const crit = JSON.parse(criterion(problem()));
    show({ exponents: exps, predicts_blowup: crit.predicts_blowup, verdict: crit.criterion.verdict, w_integral: crit.w_integral });
  } catch (e) {
    fail(e);
  }
}

function onSolve() {
  report.textContent = "solving…";
  setTimeout(() => {
    try {
      const res = JSON.parse(solve_curve(problem(), num("cells")));
      show({ verdict: res.label, ...res.verdict });
      plot($("sup"), [{ xs: res.t, ys: res.supnorm, color: "#c33", label: "sup |u|" }], { logY: true, xLabel: "t" });
    } catch (e) {
      fail(e);
    }
  }, 10);
}

function onCutoffs() {
  try {
    const c = JSON.parse(cutoff_profiles(num("p"), num("ct"), num("cr"), 400));
    const tn = c.t.map((t) => t / num("ct"));
    const rn = c.r.map((r) => r / num("cr"));
    plot($("cut"), [
      { xs: tn, ys: c.f_t, color: "#36c", label: "f_T (t/T)" },
      { xs: rn, ys: c.g_r, color: "#393", label: "g_R (|x|/R)" },
    ], { xLabel: "scaled argument" });
  } catch (e) {
    fail(e);
  }
}

await init();
$("btn-criterion").onclick = onCriterion;
$("btn-solve").onclick = onSolve;
$("btn-cutoffs").onclick = onCutoffs;
onCriterion();
onCutoffs();
