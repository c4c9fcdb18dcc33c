//! JSON-in, JSON-out bindings for the static demo page in `www/`.
//!
//! Every export has a plain Rust twin returning `Result<String, String>` so
//! the logic is testable without a JS host.

use heatlab::cutoffs::build_spacetime_cutoffs;
use heatlab::exponents::{blowup_criterion, exponent_report, MediaParams, WeightSign};
use heatlab::forcing::{classify_ell, default_probe_grid, q0_estimate, Window};
use heatlab::quad::QuadConfig;
use heatlab::solver::{solve, ProblemSpec, SolverConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Upper bound on returned curve points, to keep the page responsive.
const MAX_CURVE_POINTS: usize = 2000;

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn parse_problem(problem_json: &str) -> Result<ProblemSpec, String> {
    let spec: ProblemSpec = serde_json::from_str(problem_json).map_err(|e| format!("problem: {e}"))?;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

pub fn exponents_impl(dim: u32, alpha: f64) -> Result<String, String> {
    to_json(&exponent_report(dim, alpha, None, None).map_err(|e| e.to_string())?)
}

pub fn criterion_impl(problem_json: &str) -> Result<String, String> {
    let spec = parse_problem(problem_json)?;
    let quad = QuadConfig::default();
    let w_integral = spec.w.integral(spec.dim);
    let params = MediaParams::new(spec.dim, spec.alpha, spec.p, WeightSign::of(w_integral));
    let ell = classify_ell(&spec.forcing, 1e4, &quad);
    let q0 = q0_estimate(
        &spec.forcing,
        &default_probe_grid(),
        (-10.0, 10.0),
        Window::default(),
        &quad,
    )
    .ok();
    let verdict = blowup_criterion(&params, &ell, q0.as_ref()).map_err(|e| e.to_string())?;
    to_json(&json!({
        "w_integral": w_integral,
        "ell": ell,
        "q0": q0,
        "criterion": verdict,
        "predicts_blowup": verdict.predicts_blowup(),
    }))
}

pub fn solve_impl(problem_json: &str, cells: usize) -> Result<String, String> {
    let spec = parse_problem(problem_json)?;
    let cfg = SolverConfig {
        cells,
        ..SolverConfig::default()
    };
    let (trace, verdict) = solve(&spec, &cfg).map_err(|e| e.to_string())?;
    let hist = &trace.supnorm_history;
    let stride = hist.len().div_ceil(MAX_CURVE_POINTS).max(1);
    let mut curve: Vec<(f64, f64)> = hist.iter().step_by(stride).copied().collect();
    if let Some(last) = hist.last() {
        if curve.last() != Some(last) {
            curve.push(*last);
        }
    }
    let profile = trace.snapshots.last().cloned().unwrap_or_default();
    to_json(&json!({
        "verdict": verdict,
        "label": verdict.label(),
        "t": curve.iter().map(|c| c.0).collect::<Vec<_>>(),
        "supnorm": curve.iter().map(|c| c.1).collect::<Vec<_>>(),
        "r": trace.grid.nodes(),
        "final_profile": profile,
    }))
}

pub fn cutoffs_impl(p: f64, big_t: f64, big_r: f64, points: usize) -> Result<String, String> {
    let cuts = build_spacetime_cutoffs(p, big_t, big_r).map_err(|e| e.to_string())?;
    let n = points.clamp(2, 10_000);
    let ts: Vec<f64> = (0..n).map(|i| big_t * i as f64 / (n - 1) as f64).collect();
    let rs: Vec<f64> = (0..n).map(|i| 2.0 * big_r * i as f64 / (n - 1) as f64).collect();
    to_json(&json!({
        "t": ts,
        "f_t": ts.iter().map(|&t| cuts.f_t(t)).collect::<Vec<_>>(),
        "r": rs,
        "g_r": rs.iter().map(|&r| cuts.g_r(r)).collect::<Vec<_>>(),
    }))
}

#[wasm_bindgen]
pub fn exponents(dim: u32, alpha: f64) -> Result<String, JsValue> {
    exponents_impl(dim, alpha).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn criterion(problem_json: &str) -> Result<String, JsValue> {
    criterion_impl(problem_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve_curve(problem_json: &str, cells: usize) -> Result<String, JsValue> {
    solve_impl(problem_json, cells).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cutoff_profiles(p: f64, big_t: f64, big_r: f64, points: usize) -> Result<String, JsValue> {
    cutoffs_impl(p, big_t, big_r, points).map_err(|e| JsValue::from_str(&e))
}
