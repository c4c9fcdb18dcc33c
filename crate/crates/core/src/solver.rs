//! Radially symmetric method-of-lines solver for
//! `u_t = Δu + |x|^α |u|^p + a(t) w(x)` with explicit RK4 time stepping,
//! step-size control driven by the diffusion and reaction stiffness, and
//! blow-up detection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forcing::{ForcingError, ForcingProfile};
use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("time step {dt} violates the stability bound {bound}")]
    StabilityViolation { dt: f64, bound: f64 },
    #[error("not enough samples for a rate fit: {0}")]
    InsufficientSamples(String),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

/// Radial profiles for the source weight `w` and the initial data `u₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialProfile {
    Zero,
    /// Spatially constant; allowed for initial data only.
    Constant {
        value: f64,
    },
    /// `A exp(−r²/s²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `A exp(1 − 1/(1 − (r/ρ)²))` for `r < ρ`, else 0.
    CompactBump {
        amplitude: f64,
        radius: f64,
    },
    /// `A₁ exp(−r²/s₁²) − A₂ exp(−r²/s₂²)`.
    SignedGaussianPair {
        amplitude_pos: f64,
        width_pos: f64,
        amplitude_neg: f64,
        width_neg: f64,
    },
    /// Linear interpolation of `(r, value)` pairs, zero beyond the last node.
    Sampled {
        points: Vec<[f64; 2]>,
    },
}

impl SpatialProfile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian { amplitude, width }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Gaussian { amplitude, width } => amplitude * (-(r / width).powi(2)).exp(),
            Self::CompactBump { amplitude, radius } => {
                let s = r / radius;
                if s < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            Self::SignedGaussianPair {
                amplitude_pos,
                width_pos,
                amplitude_neg,
                width_neg,
            } => amplitude_pos * (-(r / width_pos).powi(2)).exp() - amplitude_neg * (-(r / width_neg).powi(2)).exp(),
            Self::Sampled { points } => {
                if r < points[0][0] {
                    return points[0][1];
                }
                let idx = points.partition_point(|p| p[0] <= r);
                if idx >= points.len() {
                    return if r == points[points.len() - 1][0] {
                        points[points.len() - 1][1]
                    } else {
                        0.0
                    };
                }
                let [r0, v0] = points[idx - 1];
                let [r1, v1] = points[idx];
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Radius beyond which the profile is zero or negligible (`< 10⁻³⁰⁰`
    /// relative), if any.
    fn effective_support(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Constant { value } => (*value == 0.0).then_some(0.0),
            Self::Gaussian { width, .. } => Some(27.0 * width.abs()),
            Self::CompactBump { radius, .. } => Some(*radius),
            Self::SignedGaussianPair {
                width_pos, width_neg, ..
            } => Some(27.0 * width_pos.abs().max(width_neg.abs())),
            Self::Sampled { points } => Some(points[points.len() - 1][0]),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidProblem(m.into()));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::Zero => {}
            Self::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant profile must be finite");
                }
            }
            Self::Gaussian { amplitude, width } => {
                if !finite(&[*amplitude, *width]) || *width <= 0.0 {
                    return bad("gaussian needs finite amplitude and positive width");
                }
            }
            Self::CompactBump { amplitude, radius } => {
                if !finite(&[*amplitude, *radius]) || *radius <= 0.0 {
                    return bad("bump needs finite amplitude and positive radius");
                }
            }
            Self::SignedGaussianPair {
                amplitude_pos,
                width_pos,
                amplitude_neg,
                width_neg,
            } => {
                if !finite(&[*amplitude_pos, *width_pos, *amplitude_neg, *width_neg])
                    || *width_pos <= 0.0
                    || *width_neg <= 0.0
                {
                    return bad("gaussian pair needs finite amplitudes and positive widths");
                }
            }
            Self::Sampled { points } => {
                if points.len() < 2 || points.iter().any(|p| !finite(p)) || points[0][0] < 0.0 {
                    return bad("sampled profile needs at least two finite nodes at r ≥ 0");
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return bad("sampled radii must be strictly increasing");
                }
            }
        }
        Ok(())
    }

    /// `∫_{ℝᴺ} w(|x|) dx` by quadrature; `NaN` for non-integrable profiles.
    pub fn integral(&self, dim: u32) -> f64 {
        let Some(support) = self.effective_support() else {
            return f64::NAN;
        };
        if support == 0.0 {
            return 0.0;
        }
        let k = dim as i32 - 1;
        let f = |r: f64| self.eval(r) * r.powi(k);
        let radial = match self {
            Self::Sampled { points } => points
                .windows(2)
                .map(|w| quad::simpson(f, w[0][0], w[1][0], 16))
                .sum::<f64>(),
            _ => quad::simpson(f, 0.0, support, 20_000),
        };
        sphere_area(dim) * radial
    }
}

/// Surface area `ω_{N−1} = N π^{N/2} / Γ(N/2 + 1)` of the unit sphere in ℝᴺ.
pub fn sphere_area(dim: u32) -> f64 {
    // Γ(N/2 + 1) by recursion from Γ(1) = 1 or Γ(1/2) = √π.
    let n = dim as f64;
    let mut gamma = if dim.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if dim.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < n / 2.0 + 1.0 - 1e-9 {
        gamma *= x;
        x += 1.0;
    }
    n * PI.powf(n / 2.0) / gamma
}

/// A full problem instance on the truncated ball `|x| ≤ r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(alias = "N")]
    pub dim: u32,
    pub alpha: f64,
    pub p: f64,
    pub forcing: ForcingProfile,
    pub w: SpatialProfile,
    pub u0: SpatialProfile,
    #[serde(alias = "R_max")]
    pub r_max: f64,
    #[serde(alias = "T_end")]
    pub t_end: f64,
    /// When false the `|x|^α|u|^p` term is dropped.
    #[serde(default = "yes")]
    pub reaction: bool,
}

fn yes() -> bool {
    true
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidProblem(m));
        if self.dim == 0 {
            return bad("N must be at least 1".into());
        }
        if !(self.alpha > -2.0 && self.alpha.is_finite()) {
            return bad(format!("α must exceed −2, got {}", self.alpha));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return bad("r_max must be positive".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive".into());
        }
        self.forcing.validate()?;
        if self.forcing.is_singular_at_zero() {
            return bad("the solver needs a(t) bounded as t → 0".into());
        }
        if let Some((lo, hi)) = self.forcing.sample_range() {
            if lo > 0.0 || hi < self.t_end {
                return bad(format!("sampled forcing must cover [0, t_end], covers [{lo}, {hi}]"));
            }
        }
        self.w.validate()?;
        self.u0.validate()?;
        if matches!(self.w, SpatialProfile::Constant { value } if value != 0.0) {
            return bad("w must be integrable; constant weights are not".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Radial cell count `M`; the grid has `M + 1` nodes.
    pub cells: usize,
    pub cfl_safety: f64,
    pub dt_min: f64,
    /// Sup-norm threshold declaring blow-up.
    pub u_max: f64,
    /// Store a snapshot every this many steps.
    pub snapshot_stride: usize,
    /// Accuracy cap on the step: `dt ≤ growth_limit/(p·max|u|^{p−1}·max V + 1)`,
    /// applied on top of the stability bound. Bounds the relative growth per
    /// step near blow-up so the rate fit sees enough samples.
    pub growth_limit: f64,
    /// Also store a snapshot whenever `max|u|` has changed by this relative
    /// amount since the last one, so fast phases stay resolved in time.
    pub snapshot_growth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cells: 512,
            cfl_safety: 0.9,
            dt_min: 1e-12,
            u_max: 1e8,
            snapshot_stride: 10,
            growth_limit: 0.05,
            snapshot_growth: 0.02,
        }
    }
}

/// Final-step-to-largest-step ratio below which the step counts as
/// collapsed.
pub const DT_COLLAPSE_RATIO: f64 = 0.05;

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.cells < 64 {
            return Err(SolverError::InvalidGrid(format!(
                "need at least 64 cells, got {}",
                self.cells
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(SolverError::InvalidProblem("cfl_safety must lie in (0, 1)".into()));
        }
        if !(self.dt_min > 0.0) {
            return Err(SolverError::InvalidProblem("dt_min must be positive".into()));
        }
        if !(self.snapshot_growth > 0.0) {
            return Err(SolverError::InvalidProblem("snapshot_growth must be positive".into()));
        }
        if !(self.growth_limit > 0.0) {
            return Err(SolverError::InvalidProblem("growth_limit must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(SolverError::InvalidProblem("snapshot_stride must be positive".into()));
        }
        Ok(())
    }
}

impl SolverConfig {
    /// Half the grid spacing and half the step-size caps.
    pub fn refined(&self) -> Self {
        Self {
            cells: 2 * self.cells,
            cfl_safety: self.cfl_safety,
            growth_limit: 0.5 * self.growth_limit,
            snapshot_stride: 2 * self.snapshot_stride,
            ..self.clone()
        }
    }
}

/// Largest relative difference between two sup-norm histories, taken at the
/// times of `coarse` where its sup-norm is below `cap` and `fine` covers the
/// time (linear interpolation in `fine`).
pub fn history_discrepancy(coarse: &[(f64, f64)], fine: &[(f64, f64)], cap: f64) -> f64 {
    let mut worst = 0.0f64;
    for &(t, s) in coarse {
        if !(s < cap) || s == 0.0 {
            continue;
        }
        let idx = fine.partition_point(|x| x.0 < t);
        if idx >= fine.len() {
            continue;
        }
        let v = if fine[idx].0 == t || idx == 0 {
            fine[idx].1
        } else {
            let (t0, s0) = fine[idx - 1];
            let (t1, s1) = fine[idx];
            s0 + (s1 - s0) * (t - t0) / (t1 - t0)
        };
        worst = worst.max((v - s).abs() / s);
    }
    worst
}

/// Uniform radial grid `r_i = i·h`, `h = r_max/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub cells: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, cells: usize) -> Result<Self, SolverError> {
        if cells < 2 || !(r_max > 0.0) {
            return Err(SolverError::InvalidGrid(format!("r_max = {r_max}, cells = {cells}")));
        }
        Ok(Self { r_max, cells })
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.cells as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.r(i)).collect()
    }
}

/// The semi-discrete system `du/dt = L u + V·|u|^p + a(t) w`.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub grid: RadialGrid,
    pub dim: u32,
    pub p: f64,
    pub reaction: bool,
    /// Potential weight `max(r_i, h/2)^α` (α < 0) or `r_i^α`.
    pub potential: Vec<f64>,
    pub w: Vec<f64>,
    pub forcing: ForcingProfile,
    max_potential: f64,
}

/// Builds the radial discretization: central differences for
/// `u_rr + (N−1)/r u_r`, the symmetric limit `N u_rr` at the origin
/// (ghost node `u₋₁ = u₁`) and homogeneous Dirichlet data at `r_max`.
pub fn discretize(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<DiscreteSystem, SolverError> {
    cfg.validate()?;
    spec.validate()?;
    let grid = RadialGrid::new(spec.r_max, cfg.cells)?;
    let h = grid.h();
    let potential: Vec<f64> = (0..=grid.cells)
        .map(|i| {
            let r = grid.r(i);
            if spec.alpha < 0.0 {
                r.max(0.5 * h).powf(spec.alpha)
            } else if spec.alpha == 0.0 {
                1.0
            } else {
                r.powf(spec.alpha)
            }
        })
        .collect();
    let max_potential = potential.iter().copied().fold(0.0, f64::max);
    Ok(DiscreteSystem {
        w: grid.nodes().iter().map(|&r| spec.w.eval(r)).collect(),
        grid,
        dim: spec.dim,
        p: spec.p,
        reaction: spec.reaction,
        potential,
        forcing: spec.forcing.clone(),
        max_potential,
    })
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.grid.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Discrete radial Laplacian at every node; zero at the Dirichlet node.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let m = self.grid.cells;
        let h = self.grid.h();
        let inv_h2 = 1.0 / (h * h);
        let n1 = self.dim as f64 - 1.0;
        out[0] = self.dim as f64 * 2.0 * (u[1] - u[0]) * inv_h2;
        for i in 1..m {
            let r = i as f64 * h;
            out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2 + n1 / r * (u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        out[m] = 0.0;
    }

    pub fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        self.laplacian(u, out);
        let a = self.forcing.value_unchecked(t)?;
        let m = self.grid.cells;
        for i in 0..m {
            let mut s = a * self.w[i];
            if self.reaction {
                s += self.potential[i] * u[i].abs().powf(self.p);
            }
            out[i] += s;
        }
        out[m] = 0.0;
        Ok(())
    }

    /// Largest stable step for the state `u`:
    /// `min(cfl·h²/(2N), cfl/(p·max|u|^{p−1}·max V + 1))`.
    pub fn stable_dt(&self, u: &[f64], cfl: f64) -> f64 {
        let h = self.grid.h();
        let diffusion = cfl * h * h / (2.0 * self.dim as f64);
        if !self.reaction {
            return diffusion;
        }
        diffusion.min(cfl * self.reaction_scale(u))
    }

    /// `1/(p·max|u|^{p−1}·max V + 1)`, the reaction time scale.
    pub fn reaction_scale(&self, u: &[f64]) -> f64 {
        if !self.reaction {
            return f64::INFINITY;
        }
        let sup = sup_norm(u);
        1.0 / (self.p * sup.powf(self.p - 1.0) * self.max_potential + 1.0)
    }
}

pub fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Reusable RK4 stage buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    cfl: f64,
}

impl Stepper {
    pub fn new(system: &DiscreteSystem, cfl: f64) -> Self {
        let n = system.len();
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
            cfl,
        }
    }

    /// One classical fourth-order Runge–Kutta step, in place.
    pub fn step(&mut self, system: &DiscreteSystem, u: &mut [f64], t: f64, dt: f64) -> Result<(), SolverError> {
        let bound = system.stable_dt(u, self.cfl);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(SolverError::StabilityViolation { dt, bound });
        }
        let n = u.len();
        system.rhs(t, u, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = u[i] + 0.5 * dt * self.k1[i];
        }
        system.rhs(t + 0.5 * dt, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = u[i] + 0.5 * dt * self.k2[i];
        }
        system.rhs(t + 0.5 * dt, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = u[i] + dt * self.k3[i];
        }
        system.rhs(t + dt, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            u[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

/// Time-indexed record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrace {
    pub problem: ProblemSpec,
    pub config: SolverConfig,
    pub grid: RadialGrid,
    /// Snapshot times, strictly increasing.
    pub times: Vec<f64>,
    /// Radial arrays of `u`, one per snapshot, each of length `M + 1`.
    pub snapshots: Vec<Vec<f64>>,
    /// `(t, max|u|)` after every step, starting at `t = 0`.
    pub supnorm_history: Vec<(f64, f64)>,
    /// Step sizes, one per step.
    pub dt_history: Vec<f64>,
    /// `max|u|` over the outer 10% of the domain, per snapshot.
    pub boundary_monitor: Vec<f64>,
    /// The same monitor after every step, aligned with `supnorm_history`.
    pub boundary_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum VerdictClass {
    BlownUp { t_b: f64, rate_exponent: f64 },
    GlobalUpTo { t_end: f64 },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub class: VerdictClass,
    pub final_supnorm: f64,
    pub final_dt: f64,
    pub final_time: f64,
    pub steps: usize,
    pub boundary_contaminated: bool,
}

impl BlowupVerdict {
    pub fn is_blown_up(&self) -> bool {
        matches!(self.class, VerdictClass::BlownUp { .. })
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self.class {
            VerdictClass::BlownUp { t_b, .. } => Some(t_b),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.class {
            VerdictClass::BlownUp { .. } => "blown-up",
            VerdictClass::GlobalUpTo { .. } => "global-up-to",
            VerdictClass::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Fraction of the outer domain watched for truncation artifacts.
const BOUNDARY_BAND: f64 = 0.1;

fn boundary_max(u: &[f64]) -> f64 {
    let m = u.len() - 1;
    let start = ((1.0 - BOUNDARY_BAND) * m as f64).floor() as usize;
    sup_norm(&u[start..])
}

/// Integrates `spec` until `t_end`, the sup-norm threshold, or the minimum
/// step, and classifies the outcome.
///
/// `u0_override` replaces the nodal initial data (used for seeded
/// perturbations); it must have `M + 1` entries.
pub fn solve_with_initial(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    u0_override: Option<Vec<f64>>,
) -> Result<(SolutionTrace, BlowupVerdict), SolverError> {
    let system = discretize(spec, cfg)?;
    let grid = system.grid.clone();
    let mut u: Vec<f64> = match u0_override {
        Some(v) => {
            if v.len() != system.len() {
                return Err(SolverError::InvalidGrid(format!(
                    "initial data has {} nodes, grid has {}",
                    v.len(),
                    system.len()
                )));
            }
            v
        }
        None => grid.nodes().iter().map(|&r| spec.u0.eval(r)).collect(),
    };
    let m = grid.cells;
    u[m] = 0.0;
    let sup0 = sup_norm(&u);
    if !(cfg.u_max > sup0) {
        return Err(SolverError::InvalidProblem(format!(
            "u_max = {} must exceed sup|u0| = {sup0}",
            cfg.u_max
        )));
    }

    let mut stepper = Stepper::new(&system, cfg.cfl_safety);
    let mut t = 0.0;
    let mut trace = SolutionTrace {
        problem: spec.clone(),
        config: cfg.clone(),
        grid: grid.clone(),
        times: vec![0.0],
        snapshots: vec![u.clone()],
        supnorm_history: vec![(0.0, sup0)],
        dt_history: Vec::new(),
        boundary_monitor: vec![boundary_max(&u)],
        boundary_history: vec![boundary_max(&u)],
    };

    enum Stop {
        Horizon,
        Threshold,
        StepCollapse,
        NonFinite,
    }
    let mut steps = 0usize;
    let mut last_dt = 0.0;
    let mut last_snap_sup = sup0;
    let stop = loop {
        let remaining = spec.t_end - t;
        if remaining <= 1e-14 * spec.t_end.max(1.0) {
            break Stop::Horizon;
        }
        let stable = system.stable_dt(&u, cfg.cfl_safety);
        if stable < cfg.dt_min {
            break Stop::StepCollapse;
        }
        let dt = stable.min(cfg.growth_limit * system.reaction_scale(&u)).min(remaining);
        stepper.step(&system, &mut u, t, dt)?;
        t = if dt == remaining { spec.t_end } else { t + dt };
        steps += 1;
        last_dt = dt;
        let sup = sup_norm(&u);
        trace.supnorm_history.push((t, sup));
        trace.dt_history.push(dt);
        trace.boundary_history.push(boundary_max(&u));
        if !sup.is_finite() {
            break Stop::NonFinite;
        }
        let done = sup > cfg.u_max || t >= spec.t_end;
        let jumped = (sup - last_snap_sup).abs() > cfg.snapshot_growth * last_snap_sup.max(f64::MIN_POSITIVE);
        if steps.is_multiple_of(cfg.snapshot_stride) || done || jumped {
            last_snap_sup = sup;
            trace.times.push(t);
            trace.snapshots.push(u.clone());
            trace.boundary_monitor.push(boundary_max(&u));
        }
        if sup > cfg.u_max {
            break Stop::Threshold;
        }
    };

    let final_supnorm = trace.supnorm_history.last().map_or(sup0, |x| x.1);
    let boundary_contaminated = trace.boundary_monitor.iter().any(|&b| !(b <= 1e-6 * cfg.u_max));
    let max_dt = trace.dt_history.iter().copied().fold(0.0, f64::max);
    let class = match stop {
        Stop::Horizon => VerdictClass::GlobalUpTo { t_end: spec.t_end },
        Stop::NonFinite => VerdictClass::Inconclusive {
            reason: "solution became non-finite before reaching the threshold".into(),
        },
        Stop::StepCollapse => VerdictClass::Inconclusive {
            reason: format!("stable step fell below dt_min = {} before the threshold", cfg.dt_min),
        },
        Stop::Threshold => {
            let collapsed = last_dt < 10.0 * cfg.dt_min || last_dt <= DT_COLLAPSE_RATIO * max_dt;
            match fit_blowup_rate(&trace) {
                Ok(fit) if collapsed && fit.rate_exponent > 0.0 => VerdictClass::BlownUp {
                    t_b: fit.t_b,
                    rate_exponent: fit.rate_exponent,
                },
                Ok(fit) if !collapsed => VerdictClass::Inconclusive {
                    reason: format!(
                        "threshold exceeded but the step did not collapse (final {last_dt:e}, max {max_dt:e}); fitted rate {}",
                        fit.rate_exponent
                    ),
                },
                Ok(fit) => VerdictClass::Inconclusive {
                    reason: format!("non-positive fitted growth rate {}", fit.rate_exponent),
                },
                Err(e) => VerdictClass::Inconclusive {
                    reason: format!("threshold exceeded but the rate fit failed: {e}"),
                },
            }
        }
    };
    let class = match class {
        VerdictClass::BlownUp { .. } | VerdictClass::GlobalUpTo { .. } if boundary_contaminated => {
            VerdictClass::Inconclusive {
                reason: "boundary monitor exceeded 1e-6·u_max: truncation contaminates the run".into(),
            }
        }
        c => c,
    };
    let verdict = BlowupVerdict {
        class,
        final_supnorm,
        final_dt: last_dt,
        final_time: t,
        steps,
        boundary_contaminated,
    };
    Ok((trace, verdict))
}

pub fn solve(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<(SolutionTrace, BlowupVerdict), SolverError> {
    solve_with_initial(spec, cfg, None)
}

/// Lower end of the sup-norm range used by [`fit_blowup_rate`].
pub const RATE_FIT_FLOOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub t_b: f64,
    pub rate_exponent: f64,
    pub samples: usize,
}

/// Fits `max|u| ≈ c (t_b − t)^{−γ}` over the samples with
/// `10³ ≤ max|u| ≤ u_max`.
///
/// For a power law `S/S' = (t_b − t)/γ` is affine in `t`, so `t_b` is the
/// root of a straight-line fit of finite-difference `S/S'`. The exponent is
/// then the least-squares slope of `log S` against `−log(t_b − t)`.
pub fn fit_blowup_rate(trace: &SolutionTrace) -> Result<RateFit, SolverError> {
    fit_rate_samples(&trace.supnorm_history, trace.config.u_max)
}

pub fn fit_rate_samples(history: &[(f64, f64)], u_max: f64) -> Result<RateFit, SolverError> {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .copied()
        .filter(|&(_, s)| (RATE_FIT_FLOOR..=u_max).contains(&s))
        .collect();
    if pts.len() < 20 {
        return Err(SolverError::InsufficientSamples(format!(
            "{} samples with sup-norm in [{RATE_FIT_FLOOR}, {u_max}], need 20",
            pts.len()
        )));
    }
    let mut ts = Vec::with_capacity(pts.len());
    let mut zs = Vec::with_capacity(pts.len());
    for w in pts.windows(3) {
        let (t0, s0) = w[0];
        let (t1, s1) = w[1];
        let (t2, s2) = w[2];
        // d(log S)/dt on a nonuniform stencil
        let (l0, l1, l2) = (s0.ln(), s1.ln(), s2.ln());
        let ha = t1 - t0;
        let hb = t2 - t1;
        if ha <= 0.0 || hb <= 0.0 {
            continue;
        }
        let dlog = -hb / (ha * (ha + hb)) * l0 + (hb - ha) / (ha * hb) * l1 + ha / (hb * (ha + hb)) * l2;
        if dlog > 0.0 {
            ts.push(t1);
            zs.push(1.0 / dlog);
        }
    }
    let (slope, intercept) =
        quad::linear_fit(&ts, &zs).ok_or_else(|| SolverError::InsufficientSamples("degenerate sample times".into()))?;
    let t_last = pts[pts.len() - 1].0;
    let mut t_b = if slope < 0.0 { -intercept / slope } else { f64::NAN };
    if !(t_b > t_last) {
        // The extrapolated root must lie ahead of the data.
        let span = t_last - pts[0].0;
        t_b = t_last + 1e-6 * span.max(f64::MIN_POSITIVE);
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| -(t_b - t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, s)| s.ln()).collect();
    let (rate, _) = quad::linear_fit(&xs, &ys)
        .ok_or_else(|| SolverError::InsufficientSamples("degenerate fit abscissae".into()))?;
    Ok(RateFit {
        t_b,
        rate_exponent: rate,
        samples: pts.len(),
    })
}
