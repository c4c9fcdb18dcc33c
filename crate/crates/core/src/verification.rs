//! Post-processing of solver traces: the functionals `F_R, G_R, H_R, K_R`,
//! the space-integrated equation, the two Hölder steps, the space-time
//! decomposition `I + II ≤ III + IV`, the `(T, R)` scaling of its remainder
//! terms, and the scalar lemmas (separable ODE bound and `min Z − λZ^θ`).
//!
//! Spatial integrals over `ℝᴺ` of radial data use nodal weights
//! `c_i = ω_{N−1} ∫ ĥ_i(r) r^{N−1} dr` with `ĥ_i` the hat function of node
//! `i`. With one sub-cell this is the quadrature the discrete scheme
//! conserves, so discrete Hölder inequalities hold exactly; refined rules
//! evaluate the linear interpolant of `u` on sub-cells and calibrate the
//! quadrature tolerance of each check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutoffs::{CutoffError, CutoffFamily, SpacetimeCutoffs};
use crate::exponents::p_lower;
use crate::forcing::ForcingError;
use crate::quad;
use crate::solver::{sphere_area, SolutionTrace, SpatialProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("2R = {two_r} exceeds the domain radius {r_max}")]
    RExceedsDomain { two_r: f64, r_max: f64 },
    #[error("anchor t0 = {t0} lies outside the trace times [{lo}, {hi}]")]
    AnchorOutsideTrace { t0: f64, lo: f64, hi: f64 },
    #[error("annulus integral diverges: {0}")]
    AnnulusIntegralDiverges(String),
    #[error("p = {p} does not exceed 1 + α/N = {threshold}; |x|^(−α/(p−1)) is not locally integrable")]
    IntegrabilityViolated { p: f64, threshold: f64 },
    #[error("cutoff support reaches t = {needed}, beyond the trace horizon {horizon}")]
    HorizonExceeded { needed: f64, horizon: f64 },
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// Nodal radial quadrature on a uniform grid refined into `sub_cells`
/// pieces per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub sub_cells: usize,
    /// Cell width of the underlying solver grid.
    pub h: f64,
}

impl RadialRule {
    pub fn new(r_max: f64, cells: usize, dim: u32, sub_cells: usize) -> Self {
        let k = sub_cells.max(1);
        let n = cells * k;
        let hs = r_max / n as f64;
        let omega = sphere_area(dim);
        let e = dim as i32 - 1;
        let nodes: Vec<f64> = (0..=n).map(|j| j as f64 * hs).collect();
        let mut weights = vec![0.0; n + 1];
        for j in 0..n {
            let (a, b) = (nodes[j], nodes[j + 1]);
            // hat halves on [a, b]; GL5 is exact for these polynomials up to N = 9
            weights[j] += omega * quad::gauss_legendre5(|r| (b - r) / hs * r.powi(e), a, b);
            weights[j + 1] += omega * quad::gauss_legendre5(|r| (r - a) / hs * r.powi(e), a, b);
        }
        Self {
            nodes,
            weights,
            sub_cells: k,
            h: r_max / cells as f64,
        }
    }

    pub fn for_trace(trace: &SolutionTrace, sub_cells: usize) -> Self {
        Self::new(trace.grid.r_max, trace.grid.cells, trace.problem.dim, sub_cells)
    }

    /// Values of the piecewise-linear interpolant of nodal data `u` at the
    /// rule nodes.
    pub fn sample(&self, u: &[f64]) -> Vec<f64> {
        let k = self.sub_cells;
        if k == 1 {
            return u.to_vec();
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        for j in 0..self.nodes.len() {
            let (i, rem) = (j / k, j % k);
            if rem == 0 {
                out.push(u[i]);
            } else {
                let s = rem as f64 / k as f64;
                out.push((1.0 - s) * u[i] + s * u[i + 1]);
            }
        }
        out
    }

    pub fn integrate(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(j, (&r, &w))| w * f(j, r))
            .sum()
    }
}

/// The solver's potential weight `|x|^α` at radius `r`, regularized as
/// `max(r, h/2)^α` for `α < 0`.
pub fn potential(alpha: f64, r: f64, h: f64) -> f64 {
    if alpha < 0.0 {
        r.max(0.5 * h).powf(alpha)
    } else if alpha == 0.0 {
        1.0
    } else {
        r.powf(alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalTrace {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub big_r: f64,
    pub t0: f64,
    pub sub_cells: usize,
}

fn check_radius(trace: &SolutionTrace, big_r: f64) -> Result<(), VerificationError> {
    if !(big_r > 0.0) || 2.0 * big_r > trace.grid.r_max * (1.0 + 1e-12) {
        return Err(VerificationError::RExceedsDomain {
            two_r: 2.0 * big_r,
            r_max: trace.grid.r_max,
        });
    }
    Ok(())
}

/// `F_R, G_R, H_R` at one snapshot under `rule`.
fn snapshot_functionals(rule: &RadialRule, phi: &[f64], u: &[f64], alpha: f64, p: f64) -> (f64, f64, f64) {
    let v = rule.sample(u);
    let f = rule.integrate(|j, _| v[j] * phi[j]);
    let g = rule.integrate(|j, r| potential(alpha, r, rule.h) * v[j].abs().powf(p) * phi[j]);
    let h = rule.integrate(|j, _| v[j].abs() * phi[j]);
    (f, g, h)
}

fn phi_on(rule: &RadialRule, family: &CutoffFamily, big_r: f64) -> Vec<f64> {
    rule.nodes.iter().map(|&r| family.phi(r / big_r)).collect()
}

/// Trapezoid `∫_{t0}^{t} y` at every sample time (negative before `t0`).
fn cumulative_from(times: &[f64], ys: &[f64], t0: f64) -> Vec<f64> {
    let n = times.len();
    let mut cum = vec![0.0; n];
    for i in 1..n {
        cum[i] = cum[i - 1] + 0.5 * (ys[i] + ys[i - 1]) * (times[i] - times[i - 1]);
    }
    // value at t0 by linear interpolation of the cumulative integral of the
    // linear interpolant
    let idx = times.partition_point(|&t| t <= t0).max(1).min(n - 1);
    let (ta, tb) = (times[idx - 1], times[idx]);
    let s = if tb > ta { (t0 - ta) / (tb - ta) } else { 0.0 };
    let y0 = ys[idx - 1] + s * (ys[idx] - ys[idx - 1]);
    let at_t0 = cum[idx - 1] + 0.5 * (ys[idx - 1] + y0) * (t0 - ta);
    cum.iter().map(|c| c - at_t0).collect()
}

pub fn compute_functionals_with(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
    t0: f64,
    sub_cells: usize,
) -> Result<FunctionalTrace, VerificationError> {
    check_radius(trace, big_r)?;
    let (lo, hi) = (trace.times[0], trace.times[trace.times.len() - 1]);
    if !(t0 >= lo && t0 <= hi) {
        return Err(VerificationError::AnchorOutsideTrace { t0, lo, hi });
    }
    let rule = RadialRule::for_trace(trace, sub_cells);
    let phi = phi_on(&rule, family, big_r);
    let (alpha, p) = (trace.problem.alpha, trace.problem.p);
    let mut f = Vec::with_capacity(trace.times.len());
    let mut g = Vec::with_capacity(trace.times.len());
    let mut h = Vec::with_capacity(trace.times.len());
    for u in &trace.snapshots {
        let (a, b, c) = snapshot_functionals(&rule, &phi, u, alpha, p);
        f.push(a);
        g.push(b);
        h.push(c);
    }
    let hp: Vec<f64> = h.iter().map(|x| x.powf(p)).collect();
    let k = if trace.times.len() == 1 {
        vec![0.0]
    } else {
        cumulative_from(&trace.times, &hp, t0)
    };
    Ok(FunctionalTrace {
        times: trace.times.clone(),
        f,
        g,
        h,
        k,
        big_r,
        t0,
        sub_cells: rule.sub_cells,
    })
}

/// Functionals on the nodal rule, with `φ_R(x) = φ(x/R)`.
pub fn compute_functionals(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
    t0: f64,
) -> Result<FunctionalTrace, VerificationError> {
    compute_functionals_with(trace, family, big_r, t0, 1)
}

/// Derivative of samples `ys(ts)` at index `i` from the Lagrange
/// interpolant through `idx`.
fn lagrange_derivative(ts: &[f64], ys: &[f64], idx: &[usize], i: usize) -> f64 {
    let x = ts[i];
    let mut d = 0.0;
    for &j in idx {
        // l_j'(x) = Σ_{m≠j} 1/(x_j − x_m) Π_{n≠j,m} (x − x_n)/(x_j − x_n)
        let mut lj = 0.0;
        for &m in idx {
            if m == j {
                continue;
            }
            let mut prod = 1.0 / (ts[j] - ts[m]);
            for &n in idx {
                if n != j && n != m {
                    prod *= (x - ts[n]) / (ts[j] - ts[n]);
                }
            }
            lj += prod;
        }
        d += ys[j] * lj;
    }
    d
}

/// Central differences: five-point where both neighbours pairs exist,
/// otherwise three-point. Returns `(index, derivative)` for interior samples.
fn central_derivative(ts: &[f64], ys: &[f64]) -> Vec<(usize, f64)> {
    let n = ts.len();
    if n >= 5 {
        (2..n - 2)
            .map(|i| (i, lagrange_derivative(ts, ys, &[i - 2, i - 1, i, i + 1, i + 2], i)))
            .collect()
    } else {
        (1..n.saturating_sub(1))
            .map(|i| (i, lagrange_derivative(ts, ys, &[i - 1, i, i + 1], i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormResidual {
    pub times: Vec<f64>,
    pub df_dt: Vec<f64>,
    pub residual: Vec<f64>,
    /// `max|residual| / max(1, max|dF_R/dt|)`.
    pub normalized: f64,
}

/// Residual of `dF_R/dt = ∫uΔφ_R + G_R + a(t)∫wφ_R` at interior snapshots.
pub fn weak_form_residual(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
) -> Result<WeakFormResidual, VerificationError> {
    check_radius(trace, big_r)?;
    if trace.times.len() < 3 {
        return Err(VerificationError::InsufficientGrid(format!(
            "{} snapshots, need at least 3",
            trace.times.len()
        )));
    }
    let spec = &trace.problem;
    let rule = RadialRule::for_trace(trace, 1);
    let phi = phi_on(&rule, family, big_r);
    let lap: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&r| family.scaled_phi(big_r, r, spec.dim).1)
        .collect();
    let w_phi = rule.integrate(|j, r| spec.w.eval(r) * phi[j]);
    let mut f = Vec::with_capacity(trace.times.len());
    let mut rhs = Vec::with_capacity(trace.times.len());
    for (&t, u) in trace.times.iter().zip(&trace.snapshots) {
        let (fv, gv, _) = snapshot_functionals(&rule, &phi, u, spec.alpha, spec.p);
        let diffusion = rule.integrate(|j, _| u[j] * lap[j]);
        let g_term = if spec.reaction { gv } else { 0.0 };
        f.push(fv);
        rhs.push(diffusion + g_term + spec.forcing.value_unchecked(t)? * w_phi);
    }
    let derivs = central_derivative(&trace.times, &f);
    let mut times = Vec::with_capacity(derivs.len());
    let mut df_dt = Vec::with_capacity(derivs.len());
    let mut residual = Vec::with_capacity(derivs.len());
    for (i, d) in derivs {
        times.push(trace.times[i]);
        df_dt.push(d);
        residual.push(d - rhs[i]);
    }
    let max_res = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let max_d = df_dt.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(WeakFormResidual {
        times,
        df_dt,
        residual,
        normalized: max_res / max_d.max(1.0),
    })
}

/// Per-snapshot slack of an inequality `lhs ≤ rhs`. Snapshot `k` passes when
/// `slack_k ≥ −tol_k` with `tol_k = 10·|slack_k − slack_k'| + 1e-12·scale_k`,
/// `slack_k'` computed on a twice finer quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackReport {
    pub times: Vec<f64>,
    pub slack: Vec<f64>,
    pub tol: Vec<f64>,
    /// Largest per-snapshot tolerance.
    pub tol_quad: f64,
    pub min_slack: f64,
    /// Smallest `slack_k / scale_k` over snapshots with `scale_k > 0`.
    pub min_relative_slack: f64,
    pub passed: bool,
}

impl SlackReport {
    fn from_pair(times: Vec<f64>, base: Vec<f64>, refined: &[f64], scale: &[f64]) -> Self {
        let tol: Vec<f64> = base
            .iter()
            .zip(refined)
            .zip(scale)
            .map(|((a, b), s)| 10.0 * (a - b).abs() + 1e-12 * s.max(f64::MIN_POSITIVE))
            .collect();
        let min_slack = base.iter().copied().fold(f64::INFINITY, f64::min);
        let min_relative_slack = base
            .iter()
            .zip(scale)
            .filter(|(_, s)| **s > 0.0)
            .map(|(a, s)| a / s)
            .fold(f64::INFINITY, f64::min);
        Self {
            passed: base.iter().zip(&tol).all(|(s, t)| *s >= -t),
            tol_quad: tol.iter().copied().fold(0.0, f64::max),
            times,
            slack: base,
            tol,
            min_slack,
            min_relative_slack,
        }
    }
}

/// `(∫_{R≤|x|≤2R} |x|^{−αq/p} φ_R^{−q/p} |Δφ_R|^q)^{1/q}` under `rule`.
fn step1_annulus(
    rule: &RadialRule,
    family: &CutoffFamily,
    big_r: f64,
    dim: u32,
    alpha: f64,
    p: f64,
) -> Result<f64, VerificationError> {
    let q = p / (p - 1.0);
    let mut total = 0.0;
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = r / big_r;
        if s <= 1.0 || s >= 2.0 {
            continue;
        }
        let ratio = family.laplacian_over_power(s, dim, 1.0 / p).ok_or_else(|| {
            VerificationError::AnnulusIntegralDiverges(format!(
                "θ = 1/p = {} exceeds the capacity {} of the κ = {} family",
                1.0 / p,
                family.capacity(),
                family.kappa
            ))
        })?;
        // φ_R^{−1/p}|Δφ_R| = R⁻² (|Δφ|/φ^{1/p})(x/R)
        total += w * r.powf(-alpha * q / p) * (ratio / (big_r * big_r)).powf(q);
    }
    if !total.is_finite() {
        return Err(VerificationError::AnnulusIntegralDiverges(format!(
            "non-finite value {total}"
        )));
    }
    Ok(total.powf(1.0 / q))
}

fn step1_slacks(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
    sub_cells: usize,
) -> Result<(Vec<f64>, Vec<f64>), VerificationError> {
    let spec = &trace.problem;
    let rule = RadialRule::for_trace(trace, sub_cells);
    let phi = phi_on(&rule, family, big_r);
    let lap: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&r| family.scaled_phi(big_r, r, spec.dim).1)
        .collect();
    let annulus = step1_annulus(&rule, family, big_r, spec.dim, spec.alpha, spec.p)?;
    let mut scale = Vec::with_capacity(trace.snapshots.len());
    let slacks = trace
        .snapshots
        .iter()
        .map(|u| {
            let v = rule.sample(u);
            let lhs = rule.integrate(|j, _| v[j] * lap[j]).abs();
            let (_, g, _) = snapshot_functionals(&rule, &phi, u, spec.alpha, spec.p);
            let rhs = g.powf(1.0 / spec.p) * annulus;
            scale.push(rhs.max(lhs));
            rhs - lhs
        })
        .collect();
    Ok((slacks, scale))
}

/// Slack of `|∫uΔφ_R| ≤ G_R^{1/p} (∫_{R≤|x|≤2R} |x|^{−αq/p} φ_R^{−q/p}|Δφ_R|^q)^{1/q}`.
pub fn holder_check_step1(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
) -> Result<SlackReport, VerificationError> {
    check_radius(trace, big_r)?;
    let (base, scale) = step1_slacks(trace, family, big_r, 1)?;
    let (fine, _) = step1_slacks(trace, family, big_r, 2)?;
    Ok(SlackReport::from_pair(trace.times.clone(), base, &fine, &scale))
}

/// `(∫_{|x|≤2R} |x|^{−α/(p−1)} dx)^{1−1/p}`, the explicit Hölder constant of
/// `H_R ≤ C G_R^{1/p}`.
pub fn step5_constant(dim: u32, alpha: f64, p: f64, big_r: f64) -> Result<f64, VerificationError> {
    let threshold = p_lower(dim, alpha);
    if !(p > threshold) {
        return Err(VerificationError::IntegrabilityViolated { p, threshold });
    }
    let e = dim as f64 - alpha / (p - 1.0);
    // ∫_0^{2R} r^{e−1} dr = (2R)^e / e
    let ball = sphere_area(dim) * (2.0 * big_r).powf(e) / e;
    Ok(ball.powf(1.0 - 1.0 / p))
}

fn step5_slacks(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
    c: f64,
    sub_cells: usize,
) -> (Vec<f64>, Vec<f64>) {
    let spec = &trace.problem;
    let rule = RadialRule::for_trace(trace, sub_cells);
    let phi = phi_on(&rule, family, big_r);
    let mut scale = Vec::with_capacity(trace.snapshots.len());
    let slacks = trace
        .snapshots
        .iter()
        .map(|u| {
            let (_, g, h) = snapshot_functionals(&rule, &phi, u, spec.alpha, spec.p);
            let rhs = c * g.powf(1.0 / spec.p);
            scale.push(rhs.max(h));
            rhs - h
        })
        .collect();
    (slacks, scale)
}

/// Slack of `H_R ≤ (∫_{|x|≤2R} |x|^{−α/(p−1)})^{1−1/p} G_R^{1/p}`.
pub fn holder_check_step5(
    trace: &SolutionTrace,
    family: &CutoffFamily,
    big_r: f64,
) -> Result<SlackReport, VerificationError> {
    check_radius(trace, big_r)?;
    let spec = &trace.problem;
    let c = step5_constant(spec.dim, spec.alpha, spec.p, big_r)?;
    let (base, scale) = step5_slacks(trace, family, big_r, c, 1);
    let (fine, _) = step5_slacks(trace, family, big_r, c, 2);
    Ok(SlackReport::from_pair(trace.times.clone(), base, &fine, &scale))
}

/// Remainder terms of the Young-inequality step, with unit constant.
///
/// `A(T,R) = ∫f_T dt · ∫|x|^{−α/(p−1)} g_R^{−1/(p−1)}|Δg_R|^{p/(p−1)} dx` and
/// `B(T,R) = ∫f_T^{−1/(p−1)}|∂_t f_T|^{p/(p−1)} dt · ∫|x|^{−α/(p−1)} g_R dx`.
pub fn a_term(cuts: &SpacetimeCutoffs, dim: u32, alpha: f64) -> Result<f64, VerificationError> {
    let p = cuts.p;
    let (t, r) = (cuts.big_t, cuts.big_r);
    let time = quad::simpson(|s| cuts.f_t(s), 0.25 * t, 0.75 * t, 4000);
    let beta = -alpha / (p - 1.0) + dim as f64 - 1.0;
    let space = sphere_area(dim)
        * quad::simpson(
            |x| x.powf(beta) * cuts.young_space_weight(x, dim),
            r,
            2f64.sqrt() * r,
            8000,
        );
    Ok(time * space)
}

pub fn b_term(cuts: &SpacetimeCutoffs, dim: u32, alpha: f64) -> Result<f64, VerificationError> {
    let p = cuts.p;
    let threshold = p_lower(dim, alpha);
    if !(p > threshold) {
        return Err(VerificationError::IntegrabilityViolated { p, threshold });
    }
    let (t, r) = (cuts.big_t, cuts.big_r);
    let time = quad::simpson(|s| cuts.young_time_weight(s), 0.25 * t, 0.75 * t, 4000);
    // ∫_0^b x^γ g(x) dx with x = b s^{1/(γ+1)} removes the origin singularity
    let gamma = -alpha / (p - 1.0) + dim as f64 - 1.0;
    let b = 2f64.sqrt() * r;
    let c = 1.0 / (gamma + 1.0);
    let space = sphere_area(dim) * b.powf(gamma + 1.0) * c * quad::simpson(|s| cuts.g_r(b * s.powf(c)), 0.0, 1.0, 8000);
    Ok(time * space)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub big_t: f64,
    pub big_r: f64,
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
    pub iv: f64,
    pub a: f64,
    pub b: f64,
    /// `I + II + ∬uΔψ + ∬u∂_tψ`, relative to `max(1, I + |II|)`.
    pub identity_residual: f64,
    /// `III + IV − I − II`.
    pub inequality_slack: f64,
    pub inequality_holds: bool,
    /// `I + II > III + IV`: a global solution up to `T` with these cutoffs
    /// is impossible, which is the contradiction the test-function argument
    /// aims for. Not an error.
    pub contradiction: bool,
}

/// Space-time quadrature of the decomposition for `ψ_{T,R} = f_T g_R`.
///
/// Needs snapshots covering the support `[T/4, 3T/4]` of `f_T`.
pub fn decomposition_report(
    trace: &SolutionTrace,
    cuts: &SpacetimeCutoffs,
) -> Result<DecompositionReport, VerificationError> {
    let spec = &trace.problem;
    check_radius(trace, cuts.big_r)?;
    if (cuts.p - spec.p).abs() > 1e-12 * spec.p {
        return Err(VerificationError::InvalidParameters(format!(
            "cutoffs built for p = {}, trace has p = {}",
            cuts.p, spec.p
        )));
    }
    let horizon = *trace.times.last().expect("trace has an initial snapshot");
    let needed = 0.75 * cuts.big_t;
    if needed > horizon {
        return Err(VerificationError::HorizonExceeded { needed, horizon });
    }
    let rule = RadialRule::for_trace(trace, 1);
    let g: Vec<f64> = rule.nodes.iter().map(|&r| cuts.g_r(r)).collect();
    let lap_g: Vec<f64> = rule.nodes.iter().map(|&r| cuts.lap_g_r(r, spec.dim)).collect();
    let w_g = rule.integrate(|j, r| spec.w.eval(r) * g[j]);

    // per-snapshot integrands, then trapezoid in time
    let n = trace.times.len();
    let mut rows = vec![[0.0f64; 6]; n];
    for (k, (&t, u)) in trace.times.iter().zip(&trace.snapshots).enumerate() {
        let ft = cuts.f_t(t);
        let dft = cuts.df_t(t);
        if ft == 0.0 && dft == 0.0 {
            continue;
        }
        let reaction = if spec.reaction {
            rule.integrate(|j, r| potential(spec.alpha, r, rule.h) * u[j].abs().powf(spec.p) * g[j])
        } else {
            0.0
        };
        let abs_u_lap = rule.integrate(|j, _| u[j].abs() * lap_g[j].abs());
        let abs_u_g = rule.integrate(|j, _| u[j].abs() * g[j]);
        let u_lap = rule.integrate(|j, _| u[j] * lap_g[j]);
        let u_g = rule.integrate(|j, _| u[j] * g[j]);
        let a = spec.forcing.value_unchecked(t)?;
        rows[k] = [
            reaction * ft,
            a * w_g * ft,
            abs_u_lap * ft,
            abs_u_g * dft.abs(),
            u_lap * ft,
            u_g * dft,
        ];
    }
    let mut acc = [0.0f64; 6];
    for k in 1..n {
        let dt = trace.times[k] - trace.times[k - 1];
        for c in 0..6 {
            acc[c] += 0.5 * dt * (rows[k][c] + rows[k - 1][c]);
        }
    }
    let [i, ii, iii, iv, u_lap_psi, u_dt_psi] = acc;
    let identity_residual = (i + ii + u_lap_psi + u_dt_psi).abs() / (i + ii.abs()).max(1.0);
    let slack = iii + iv - i - ii;
    let scale = (i + ii.abs() + iii + iv).max(1.0);
    Ok(DecompositionReport {
        big_t: cuts.big_t,
        big_r: cuts.big_r,
        i,
        ii,
        iii,
        iv,
        a: a_term(cuts, spec.dim, spec.alpha)?,
        b: b_term(cuts, spec.dim, spec.alpha).unwrap_or(f64::NAN),
        identity_residual,
        inequality_slack: slack,
        inequality_holds: slack >= -identity_residual * scale,
        contradiction: slack < -identity_residual * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope_a: f64,
    pub slope_b: f64,
    pub expected_a: f64,
    pub expected_b: f64,
    /// `(log R, log A(T₀, R))`.
    pub a_points: Vec<(f64, f64)>,
    /// `(log T, log B(T, R₀))`.
    pub b_points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn within(&self, tol: f64) -> bool {
        (self.slope_a - self.expected_a).abs() < tol && (self.slope_b - self.expected_b).abs() < tol
    }
}

fn check_geometric(name: &str, grid: &[f64]) -> Result<(), VerificationError> {
    if grid.len() < 4 {
        return Err(VerificationError::InsufficientGrid(format!(
            "{name} grid has {} points, need at least 4",
            grid.len()
        )));
    }
    if grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(VerificationError::InsufficientGrid(format!(
            "{name} grid must be positive"
        )));
    }
    let ratio = grid[1] / grid[0];
    if !(ratio > 1.0) || grid.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6) {
        return Err(VerificationError::InsufficientGrid(format!(
            "{name} grid must be geometric and increasing"
        )));
    }
    Ok(())
}

/// Log-log slopes of `A` in `R` at `T = T_grid[0]` and of `B` in `T` at
/// `R = R_grid[0]`.
pub fn scaling_fit(
    r_grid: &[f64],
    t_grid: &[f64],
    p: f64,
    alpha: f64,
    dim: u32,
) -> Result<ScalingFit, VerificationError> {
    check_geometric("R", r_grid)?;
    check_geometric("T", t_grid)?;
    let threshold = p_lower(dim, alpha);
    if !(p > threshold) {
        return Err(VerificationError::IntegrabilityViolated { p, threshold });
    }
    let a_points = r_grid
        .iter()
        .map(|&r| {
            let cuts = crate::cutoffs::build_spacetime_cutoffs(p, t_grid[0], r)?;
            Ok((r.ln(), a_term(&cuts, dim, alpha)?.ln()))
        })
        .collect::<Result<Vec<_>, VerificationError>>()?;
    let b_points = t_grid
        .iter()
        .map(|&t| {
            let cuts = crate::cutoffs::build_spacetime_cutoffs(p, t, r_grid[0])?;
            Ok((t.ln(), b_term(&cuts, dim, alpha)?.ln()))
        })
        .collect::<Result<Vec<_>, VerificationError>>()?;
    let slope = |pts: &[(f64, f64)]| {
        let xs: Vec<f64> = pts.iter().map(|x| x.0).collect();
        let ys: Vec<f64> = pts.iter().map(|x| x.1).collect();
        quad::linear_fit(&xs, &ys).map_or(f64::NAN, |x| x.0)
    };
    Ok(ScalingFit {
        slope_a: slope(&a_points),
        slope_b: slope(&b_points),
        expected_a: dim as f64 - (2.0 * p + alpha) / (p - 1.0),
        expected_b: 1.0 - p / (p - 1.0),
        a_points,
        b_points,
    })
}

fn check_ode_params(y0: f64, c: f64, p: f64) -> Result<(), VerificationError> {
    if !(y0 > 0.0 && c > 0.0 && p > 1.0) || !(y0.is_finite() && c.is_finite() && p.is_finite()) {
        return Err(VerificationError::InvalidParameters(format!(
            "need y0 > 0, C > 0, p > 1; got y0 = {y0}, C = {c}, p = {p}"
        )));
    }
    Ok(())
}

/// Latest possible existence time `t0 + y0^{1−p}/(C(p−1))` for
/// `y' ≥ C y^p`, `y(t0) = y0`. Equality holds for `y' = C y^p`.
pub fn ode_blowup_bound(t0: f64, y0: f64, c: f64, p: f64) -> Result<f64, VerificationError> {
    check_ode_params(y0, c, p)?;
    Ok(t0 + y0.powf(1.0 - p) / (c * (p - 1.0)))
}

/// RK4 integration of `y' = C y^p` from `y(t0) = y0` until `y` reaches
/// `target`; the crossing time is located inside the last step by linear
/// interpolation in `t`.
pub fn ode_threshold_time(t0: f64, y0: f64, c: f64, p: f64, target: f64) -> Result<f64, VerificationError> {
    check_ode_params(y0, c, p)?;
    if !(target > y0) {
        return Err(VerificationError::InvalidParameters(format!(
            "target {target} must exceed y0 = {y0}"
        )));
    }
    let f = |y: f64| c * y.powf(p);
    let (mut t, mut y) = (t0, y0);
    // relative growth per step ≈ 10⁻³
    loop {
        let dt = 1e-3 / (c * y.powf(p - 1.0));
        let k1 = f(y);
        let k2 = f(y + 0.5 * dt * k1);
        let k3 = f(y + 0.5 * dt * k2);
        let k4 = f(y + dt * k3);
        let next = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next >= target {
            return Ok(t + dt * (target - y) / (next - y));
        }
        t += dt;
        y = next;
    }
}

fn check_gap_params(lambda: f64, theta: f64) -> Result<(), VerificationError> {
    if !(lambda > 0.0 && lambda.is_finite() && theta > 0.0 && theta < 1.0) {
        return Err(VerificationError::InvalidParameters(format!(
            "need λ > 0 and θ in (0, 1); got λ = {lambda}, θ = {theta}"
        )));
    }
    Ok(())
}

/// `min_{Z≥0} (Z − λZ^θ)`, found by golden-section search on
/// `[0, (λ·max(1, θ))^{2/(1−θ)} + 1]`.
///
/// Calculus gives the minimizer `Z* = (λθ)^{1/(1−θ)}` and the value
/// `(θ−1) θ^{θ/(1−θ)} λ^{1/(1−θ)}`. Statements of this identity with the
/// factor `λ^{θ/(1−θ)}` instead agree only at `λ = 1`; the search here is
/// independent of either closed form.
pub fn min_gap(lambda: f64, theta: f64) -> Result<f64, VerificationError> {
    check_gap_params(lambda, theta)?;
    let hi = (lambda * theta.max(1.0)).powf(2.0 / (1.0 - theta)) + 1.0;
    let (_, v) = quad::golden_section_min(|z| z - lambda * z.powf(theta), 0.0, hi, 1e-15);
    Ok(v.min(0.0))
}

/// `(θ−1) θ^{θ/(1−θ)} λ^{1/(1−θ)}`.
pub fn min_gap_closed_form(lambda: f64, theta: f64) -> Result<f64, VerificationError> {
    check_gap_params(lambda, theta)?;
    Ok((theta - 1.0) * theta.powf(theta / (1.0 - theta)) * lambda.powf(1.0 / (1.0 - theta)))
}

/// `∫wφ_R` for each `R`, which should approach `∫w` as `R` grows.
pub fn weight_mass_convergence(w: &SpatialProfile, family: &CutoffFamily, dim: u32, radii: &[f64]) -> Vec<(f64, f64)> {
    let e = dim as i32 - 1;
    let omega = sphere_area(dim);
    radii
        .iter()
        .map(|&big_r| {
            let v = omega
                * quad::simpson(
                    |r| w.eval(r) * family.phi(r / big_r) * r.powi(e),
                    0.0,
                    2.0 * big_r,
                    20_000,
                );
            (big_r, v)
        })
        .collect()
}

/// Trend summary of a functional trace on the snapshots after `t_from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Fraction of consecutive increments of `F_R` that are nonnegative.
    pub f_increasing_fraction: f64,
    /// `K_R` nondecreasing everywhere.
    pub k_monotone: bool,
    /// `H_R ≥ |F_R|` up to rounding at every snapshot.
    pub h_dominates_f: bool,
    /// Largest relative mismatch between central-difference `dK_R/dt` and
    /// `H_R^p` at interior snapshots.
    pub k_derivative_error: f64,
}

pub fn trend_report(ft: &FunctionalTrace, p: f64, t_from: f64) -> TrendReport {
    let idx: Vec<usize> = (0..ft.times.len()).filter(|&i| ft.times[i] >= t_from).collect();
    let incs: Vec<f64> = idx.windows(2).map(|w| ft.f[w[1]] - ft.f[w[0]]).collect();
    let f_increasing_fraction = if incs.is_empty() {
        1.0
    } else {
        incs.iter().filter(|&&d| d >= 0.0).count() as f64 / incs.len() as f64
    };
    let k_monotone = ft.k.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
    let h_dominates_f =
        ft.f.iter()
            .zip(&ft.h)
            .all(|(f, h)| *h >= f.abs() - 1e-12 * h.abs().max(1e-300));
    let mut k_derivative_error = 0.0f64;
    for i in 1..ft.times.len().saturating_sub(1) {
        // three-point derivative of the trapezoid integral recovers the
        // integrand average of the two neighbouring cells
        let d = lagrange_derivative(&ft.times, &ft.k, &[i - 1, i, i + 1], i);
        let hp = ft.h[i].powf(p);
        let spread = (ft.h[i - 1].powf(p) - hp).abs().max((ft.h[i + 1].powf(p) - hp).abs());
        let err = ((d - hp).abs() - spread).max(0.0) / hp.abs().max(1e-300);
        k_derivative_error = k_derivative_error.max(err);
    }
    TrendReport {
        f_increasing_fraction,
        k_monotone,
        h_dominates_f,
        k_derivative_error,
    }
}
