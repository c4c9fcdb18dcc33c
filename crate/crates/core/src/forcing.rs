//! Time amplitudes `a(t) ≥ 0` of the forcing term `a(t)w(x)`.
//!
//! Besides pointwise evaluation this module computes the running Cesàro mean
//! `A(t) = (1/t)∫₀ᵗ a`, classifies its limit `ℓ`, and estimates the
//! infimum `q₀` of the divergence set
//!
//! ```text
//! J = { q ∈ ℝ : T^q ∫_{λT}^{µT} a(t) dt → ∞ as T → ∞ },   (λ, µ) = (1/2, 2/3)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadConfig};

/// Slope above which `T^q·W(T)` counts as diverging at the largest probes.
pub const DIVERGENCE_SLOPE_THRESHOLD: f64 = 0.1;

/// Number of probe times used by [`classify_ell`].
pub const ELL_PROBES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForcingError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("t = {t} lies outside the sampled range [{lo}, {hi}]")]
    OutsideSampleRange { t: f64, lo: f64, hi: f64 },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("insufficient probe grid: {0}")]
    InsufficientGrid(String),
    #[error("invalid forcing profile: {0}")]
    InvalidProfile(String),
}

/// One-period profile evaluated on the unit phase `θ ∈ [0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodicShape {
    /// `cos²(πθ)`; with period `π` this is `cos²(t)`.
    CosSquared,
    /// `sin²(πθ)`; with period `π` this is `sin²(t)`.
    SinSquared,
    /// `sin(2πθ)`.
    Sine,
    /// `cos(2πθ)`.
    Cosine,
    /// `offset + cos(2πθ)`.
    RaisedCosine { offset: f64 },
    /// Piecewise-linear periodic interpolation of equally spaced phase samples.
    Samples { values: Vec<f64> },
}

impl PeriodicShape {
    pub fn at_phase(&self, phase: f64) -> f64 {
        let th = phase.rem_euclid(1.0);
        match self {
            Self::CosSquared => (PI * th).cos().powi(2),
            Self::SinSquared => (PI * th).sin().powi(2),
            Self::Sine => (2.0 * PI * th).sin(),
            Self::Cosine => (2.0 * PI * th).cos(),
            Self::RaisedCosine { offset } => offset + (2.0 * PI * th).cos(),
            Self::Samples { values } => {
                let n = values.len();
                let x = th * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let frac = x - i as f64;
                values[i] * (1.0 - frac) + values[(i + 1) % n] * frac
            }
        }
    }

    /// Mean over one period.
    pub fn mean(&self) -> f64 {
        match self {
            Self::CosSquared | Self::SinSquared => 0.5,
            Self::Sine | Self::Cosine => 0.0,
            Self::RaisedCosine { offset } => *offset,
            Self::Samples { values } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Self::CosSquared | Self::SinSquared => 0.0,
            Self::Sine | Self::Cosine => -1.0,
            Self::RaisedCosine { offset } => offset - 1.0,
            Self::Samples { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn validate(&self) -> Result<(), ForcingError> {
        if let Self::Samples { values } = self {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(ForcingError::InvalidProfile(
                    "periodic samples must be a nonempty list of finite values".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A periodic function `ψ(t) = shape(t/ϑ)` with period `ϑ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periodic {
    pub shape: PeriodicShape,
    pub period: f64,
}

impl Periodic {
    pub fn new(shape: PeriodicShape, period: f64) -> Self {
        Self { shape, period }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.shape.at_phase(t / self.period)
    }

    pub fn mean(&self) -> f64 {
        self.shape.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Forcing amplitude families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingProfile {
    /// `a(t) = c`.
    Constant { value: f64 },
    /// `a(t) = a∞ t^m`.
    Power { amplitude: f64, exponent: f64 },
    /// `a(t) = a∞ t^m (ln(1 + t))^q`, which behaves like `a∞ t^m (ln t)^q`
    /// at infinity and stays nonnegative near zero.
    PowerLog {
        amplitude: f64,
        exponent: f64,
        log_exponent: f64,
    },
    /// `a(t) = ψ(t)` with `ψ` periodic.
    Periodic { shape: PeriodicShape, period: f64 },
    /// `a(t) = t^m ψ(t)` with `ψ` periodic.
    OscillatingPower {
        exponent: f64,
        shape: PeriodicShape,
        period: f64,
    },
    /// `a(t) = e^{±rate·t}`.
    ExpGrowth { sign: Sign, rate: f64 },
    /// Linear interpolation of `(t, a(t))` pairs; no extrapolation.
    Sampled { points: Vec<[f64; 2]> },
}

impl ForcingProfile {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn power(amplitude: f64, exponent: f64) -> Self {
        Self::Power { amplitude, exponent }
    }

    pub fn periodic(shape: PeriodicShape, period: f64) -> Self {
        Self::Periodic { shape, period }
    }

    pub fn exp_growth(sign: Sign, rate: f64) -> Self {
        Self::ExpGrowth { sign, rate }
    }

    /// Checks the family parameters: nonnegativity of `a`, positive periods,
    /// strictly increasing sample grids.
    pub fn validate(&self) -> Result<(), ForcingError> {
        let bad = |msg: &str| Err(ForcingError::InvalidProfile(msg.to_string()));
        match self {
            Self::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad("constant forcing must be finite and nonnegative");
                }
            }
            Self::Power { amplitude, exponent }
            | Self::PowerLog {
                amplitude, exponent, ..
            } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0 && exponent.is_finite()) {
                    return bad("power amplitude must be finite and nonnegative");
                }
                if let Self::PowerLog { log_exponent, .. } = self {
                    if !log_exponent.is_finite() {
                        return bad("log exponent must be finite");
                    }
                }
            }
            Self::Periodic { shape, period } | Self::OscillatingPower { shape, period, .. } => {
                shape.validate()?;
                if !(period.is_finite() && *period > 0.0) {
                    return bad("period must be positive");
                }
                if shape.min_value() < 0.0 {
                    return bad("periodic factor of a forcing amplitude must be nonnegative");
                }
                if let Self::OscillatingPower { exponent, .. } = self {
                    if !exponent.is_finite() {
                        return bad("exponent must be finite");
                    }
                }
            }
            Self::ExpGrowth { rate, .. } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return bad("exponential rate must be finite and nonnegative");
                }
            }
            Self::Sampled { points } => {
                if points.len() < 2 {
                    return bad("sampled forcing needs at least two points");
                }
                if points.iter().any(|[t, a]| !t.is_finite() || !a.is_finite() || *a < 0.0) {
                    return bad("sampled values must be finite with a ≥ 0");
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return bad("sample times must be strictly increasing");
                }
            }
        }
        Ok(())
    }

    /// Whether `∫₀^t a` is finite for every `t > 0`.
    pub fn is_locally_integrable(&self) -> bool {
        match self {
            Self::Power { amplitude, exponent } => *amplitude == 0.0 || *exponent > -1.0,
            Self::PowerLog {
                amplitude,
                exponent,
                log_exponent,
            } => *amplitude == 0.0 || exponent + log_exponent > -1.0,
            Self::OscillatingPower { exponent, .. } => *exponent > -1.0,
            _ => true,
        }
    }

    /// Whether `a(t)` is unbounded as `t → 0⁺`.
    pub fn is_singular_at_zero(&self) -> bool {
        match self {
            Self::Power { amplitude, exponent } => *amplitude > 0.0 && *exponent < 0.0,
            Self::PowerLog {
                amplitude,
                exponent,
                log_exponent,
            } => *amplitude > 0.0 && exponent + log_exponent < 0.0,
            Self::OscillatingPower { exponent, .. } => *exponent < 0.0,
            _ => false,
        }
    }

    pub fn sample_range(&self) -> Option<(f64, f64)> {
        match self {
            Self::Sampled { points } => Some((points[0][0], points[points.len() - 1][0])),
            _ => None,
        }
    }

    /// Evaluation without the `t > 0` precondition; `t = 0` returns the
    /// right limit, which is `+∞` for families singular at zero.
    pub(crate) fn value_unchecked(&self, t: f64) -> Result<f64, ForcingError> {
        let v = match self {
            Self::Constant { value } => *value,
            Self::Power { amplitude, exponent } => amplitude * t.powf(*exponent),
            Self::PowerLog {
                amplitude,
                exponent,
                log_exponent,
            } => amplitude * t.powf(*exponent) * t.ln_1p().powf(*log_exponent),
            Self::Periodic { shape, period } => shape.at_phase(t / period),
            Self::OscillatingPower {
                exponent,
                shape,
                period,
            } => t.powf(*exponent) * shape.at_phase(t / period),
            Self::ExpGrowth { sign, rate } => match sign {
                Sign::Plus => (rate * t).exp(),
                Sign::Minus => (-rate * t).exp(),
            },
            Self::Sampled { points } => interpolate(points, t)?,
        };
        Ok(v.max(0.0))
    }

    /// `∫_lo^hi a(s) ds` for `0 ≤ lo < hi`.
    pub fn integral(&self, lo: f64, hi: f64, quad: &QuadConfig) -> Result<f64, ForcingError> {
        if !quad.is_valid() {
            return Err(ForcingError::QuadratureFailure("invalid quadrature resolution".into()));
        }
        if !(lo >= 0.0 && hi > lo) {
            return Err(ForcingError::QuadratureFailure(format!(
                "invalid interval [{lo}, {hi}]"
            )));
        }
        if let Self::Sampled { points } = self {
            return sampled_integral(points, lo, hi);
        }
        let f = |s: f64| self.value_unchecked(s).unwrap_or(f64::NAN);
        let value = if lo == 0.0 && self.is_singular_at_zero() {
            if !self.is_locally_integrable() {
                return Err(ForcingError::QuadratureFailure(
                    "non-integrable singularity at t = 0".into(),
                ));
            }
            // Closed form of the leading power on [0, ε], graded Simpson up to
            // min(hi, 1), uniform Simpson beyond.
            let eps = 1e-9 * hi.min(1.0);
            let head = self.leading_power_integral(eps);
            let knee = hi.min(1.0);
            let mid = quad::simpson_graded(f, eps, knee, 32);
            let tail = if hi > knee {
                quad::simpson_cfg(f, knee, hi, quad)
            } else {
                0.0
            };
            head + mid + tail
        } else {
            quad::simpson_cfg(f, lo, hi, quad)
        };
        if value.is_nan() {
            return Err(ForcingError::QuadratureFailure("integrand produced NaN".into()));
        }
        Ok(value)
    }

    /// `∫₀^ε c·s^k ds` for the leading behaviour `c·s^k` of a family
    /// singular at zero.
    fn leading_power_integral(&self, eps: f64) -> f64 {
        let (c, k) = match self {
            Self::Power { amplitude, exponent } => (*amplitude, *exponent),
            // ln(1 + s) ~ s near zero.
            Self::PowerLog {
                amplitude,
                exponent,
                log_exponent,
            } => (*amplitude, exponent + log_exponent),
            Self::OscillatingPower { exponent, shape, .. } => (shape.at_phase(0.0), *exponent),
            _ => return 0.0,
        };
        c * eps.powf(k + 1.0) / (k + 1.0)
    }

    /// Natural log of `∫_{lo}^{hi} a`, using closed forms where the plain
    /// value would overflow or underflow.
    fn log_integral(&self, lo: f64, hi: f64, quad: &QuadConfig) -> Result<f64, ForcingError> {
        match self {
            Self::ExpGrowth { sign, rate } if *rate > 0.0 => {
                // ∫ e^{st} = (e^{s·hi} − e^{s·lo})/s
                let v = match sign {
                    Sign::Plus => rate * hi + (-(-rate * (hi - lo)).exp_m1()).ln() - rate.ln(),
                    Sign::Minus => -rate * lo + (-(-rate * (hi - lo)).exp_m1()).ln() - rate.ln(),
                };
                Ok(v)
            }
            _ => {
                let v = self.integral(lo, hi, quad)?;
                Ok(if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            }
        }
    }
}

fn interpolate(points: &[[f64; 2]], t: f64) -> Result<f64, ForcingError> {
    let lo = points[0][0];
    let hi = points[points.len() - 1][0];
    if !(t >= lo && t <= hi) {
        return Err(ForcingError::OutsideSampleRange { t, lo, hi });
    }
    let idx = points.partition_point(|p| p[0] <= t);
    if idx >= points.len() {
        return Ok(points[points.len() - 1][1]);
    }
    let [t0, a0] = points[idx - 1];
    let [t1, a1] = points[idx];
    Ok(a0 + (a1 - a0) * (t - t0) / (t1 - t0))
}

/// Exact integral of the piecewise-linear interpolant.
fn sampled_integral(points: &[[f64; 2]], lo: f64, hi: f64) -> Result<f64, ForcingError> {
    let a_lo = interpolate(points, lo)?;
    let a_hi = interpolate(points, hi)?;
    let mut knots = vec![[lo, a_lo]];
    knots.extend(points.iter().copied().filter(|p| p[0] > lo && p[0] < hi));
    knots.push([hi, a_hi]);
    Ok(knots
        .windows(2)
        .map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]))
        .sum())
}

/// `a(t)` for `t > 0`.
pub fn eval_a(profile: &ForcingProfile, t: f64) -> Result<f64, ForcingError> {
    if !(t > 0.0) {
        return Err(ForcingError::NonPositiveTime(t));
    }
    profile.validate()?;
    profile.value_unchecked(t)
}

/// Cesàro mean `A(t) = (1/t)∫₀ᵗ a(s) ds`.
pub fn cesaro_mean(profile: &ForcingProfile, t: f64, quad: &QuadConfig) -> Result<f64, ForcingError> {
    if !(t > 0.0) {
        return Err(ForcingError::NonPositiveTime(t));
    }
    profile.validate()?;
    if let Some((lo, hi)) = profile.sample_range() {
        if lo > 0.0 {
            return Err(ForcingError::OutsideSampleRange { t: 0.0, lo, hi });
        }
    }
    Ok(profile.integral(0.0, t, quad)? / t)
}

/// Limit class of the Cesàro mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "value", rename_all = "kebab-case")]
pub enum EllClass {
    Zero,
    Finite(f64),
    Infinite,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroEstimate {
    pub ell_class: EllClass,
    /// `(t, A(t))` at the probe times, increasing in `t`.
    pub samples: Vec<(f64, f64)>,
    pub largest_t: f64,
}

fn finite_or_zero(value: f64) -> EllClass {
    if value > 0.0 {
        EllClass::Finite(value)
    } else {
        EllClass::Zero
    }
}

fn closed_form_ell(profile: &ForcingProfile) -> Option<EllClass> {
    use ForcingProfile as F;
    let by_exponent = |amp: f64, m: f64, tie: EllClass| {
        if amp == 0.0 || m < 0.0 {
            EllClass::Zero
        } else if m > 0.0 {
            EllClass::Infinite
        } else {
            tie
        }
    };
    Some(match profile {
        F::Constant { value } => finite_or_zero(*value),
        F::Power { amplitude, exponent } => by_exponent(*amplitude, *exponent, finite_or_zero(*amplitude)),
        F::PowerLog {
            amplitude,
            exponent,
            log_exponent,
        } => {
            let tie = if *log_exponent > 0.0 {
                EllClass::Infinite
            } else if *log_exponent < 0.0 {
                EllClass::Zero
            } else {
                finite_or_zero(*amplitude)
            };
            by_exponent(*amplitude, *exponent, tie)
        }
        F::Periodic { shape, .. } => finite_or_zero(shape.mean()),
        F::OscillatingPower { exponent, shape, .. } => {
            let mean = shape.mean();
            by_exponent(mean, *exponent, finite_or_zero(mean))
        }
        F::ExpGrowth { sign, rate } => {
            if *rate == 0.0 {
                EllClass::Finite(1.0)
            } else {
                match sign {
                    Sign::Plus => EllClass::Infinite,
                    Sign::Minus => EllClass::Zero,
                }
            }
        }
        F::Sampled { .. } => return None,
    })
}

/// Classifies `ℓ = lim A(t)`.
///
/// Known families use their closed-form limit; sampled profiles are
/// classified from the log-log trend of `A(t)` over the last half of the
/// probes, and come back [`EllClass::Undetermined`] when the trend is
/// ambiguous.
pub fn classify_ell(profile: &ForcingProfile, t_max: f64, quad: &QuadConfig) -> CesaroEstimate {
    let probes: Vec<f64> = (0..ELL_PROBES)
        .map(|k| t_max * 2f64.powi(k as i32 - (ELL_PROBES as i32 - 1)))
        .collect();
    let samples: Vec<(f64, f64)> = probes
        .iter()
        .filter_map(|&t| cesaro_mean(profile, t, quad).ok().map(|a| (t, a)))
        .filter(|(_, a)| a.is_finite())
        .collect();
    let ell_class = if profile.validate().is_err() {
        EllClass::Undetermined
    } else if let Some(class) = closed_form_ell(profile) {
        class
    } else {
        trend_class(&samples)
    };
    CesaroEstimate {
        ell_class,
        samples,
        largest_t: t_max,
    }
}

fn trend_class(samples: &[(f64, f64)]) -> EllClass {
    if samples.len() < ELL_PROBES {
        return EllClass::Undetermined;
    }
    if samples.iter().all(|(_, a)| *a == 0.0) {
        return EllClass::Zero;
    }
    let tail = &samples[samples.len() / 2..];
    if tail.iter().any(|(_, a)| *a <= 0.0) {
        return EllClass::Undetermined;
    }
    let xs: Vec<f64> = tail.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, a)| a.ln()).collect();
    match quad::linear_fit(&xs, &ys) {
        Some((slope, _)) if slope >= 0.5 => EllClass::Infinite,
        Some((slope, _)) if slope <= -0.5 => EllClass::Zero,
        Some((slope, _)) if slope.abs() < 0.02 => EllClass::Finite(tail[tail.len() - 1].1),
        _ => EllClass::Undetermined,
    }
}

/// The time window `(λT, µT)` entering the definition of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            lower: 0.5,
            upper: 2.0 / 3.0,
        }
    }
}

/// `∫_{λT}^{µT} a(t) dt`.
pub fn window_integral(
    profile: &ForcingProfile,
    big_t: f64,
    window: Window,
    quad: &QuadConfig,
) -> Result<f64, ForcingError> {
    if !(big_t > 0.0) {
        return Err(ForcingError::NonPositiveTime(big_t));
    }
    check_window(window)?;
    profile.validate()?;
    profile.integral(window.lower * big_t, window.upper * big_t, quad)
}

fn check_window(window: Window) -> Result<(), ForcingError> {
    if !(window.lower > 0.0 && window.upper > window.lower && window.upper < 1.0) {
        return Err(ForcingError::InvalidProfile(format!(
            "window must satisfy 0 < λ < µ < 1, got ({}, {})",
            window.lower, window.upper
        )));
    }
    Ok(())
}

/// Shape of the divergence set `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum JClass {
    Empty,
    AllReals,
    HalfLine { q0: f64 },
}

/// Per-`q` row of the divergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QProbe {
    pub q: f64,
    /// Log-log slope of `T^q·W(T)` between the two largest probes.
    pub tail_slope: f64,
    /// Least-squares slope over the whole probe grid.
    pub fitted_slope: f64,
    pub in_j: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QZeroEstimate {
    pub j_class: JClass,
    /// `inf J`: `+∞` for an empty set, `−∞` for all of ℝ.
    #[serde(with = "crate::exponents::ext_f64")]
    pub q0: f64,
    pub diagnostics: Vec<QProbe>,
}

/// Geometric probe grid `T_base·2^k`, `k = 0..count`.
pub fn geometric_grid(t_base: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_base * 2f64.powi(k as i32)).collect()
}

/// Default probe grid `{2⁰, …, 2¹⁵}`.
pub fn default_probe_grid() -> Vec<f64> {
    geometric_grid(1.0, 16)
}

const DIAGNOSTIC_ROWS: usize = 41;

/// Estimates `q₀ = inf J` on the probe grid `t_grid` within the window of
/// exponents `q_window`.
///
/// `q ∈ J` is declared when the log-log slope of `T^q·W(T)` between the two
/// largest probes exceeds [`DIVERGENCE_SLOPE_THRESHOLD`]. Since that slope
/// is affine in `q` with unit coefficient, `q₀` is located by bisection on
/// the zero crossing of the slope, to resolution `(q_hi − q_lo)/2¹⁰`.
pub fn q0_estimate(
    profile: &ForcingProfile,
    t_grid: &[f64],
    q_window: (f64, f64),
    window: Window,
    quad: &QuadConfig,
) -> Result<QZeroEstimate, ForcingError> {
    profile.validate()?;
    check_window(window)?;
    check_probe_grid(t_grid)?;
    let (q_lo, q_hi) = q_window;
    if !(q_lo.is_finite() && q_hi.is_finite() && q_lo < q_hi) {
        return Err(ForcingError::InsufficientGrid(format!(
            "q window must satisfy q_lo < q_hi, got ({q_lo}, {q_hi})"
        )));
    }
    let log_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let log_w = t_grid
        .iter()
        .map(|&t| profile.log_integral(window.lower * t, window.upper * t, quad))
        .collect::<Result<Vec<f64>, _>>()?;
    if log_w.iter().any(|v| v.is_nan()) {
        return Err(ForcingError::QuadratureFailure("window integral is NaN".into()));
    }

    let n = t_grid.len();
    let dlog_t = log_t[n - 1] - log_t[n - 2];
    let tail_slope = |q: f64| {
        let hi = q * log_t[n - 1] + log_w[n - 1];
        let lo = q * log_t[n - 2] + log_w[n - 2];
        if hi == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if lo == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (hi - lo) / dlog_t
        }
    };
    let fitted_slope = |q: f64| {
        let ys: Vec<f64> = log_t.iter().zip(&log_w).map(|(lt, lw)| q * lt + lw).collect();
        if ys.iter().all(|y| y.is_finite()) {
            quad::linear_fit(&log_t, &ys).map_or(f64::NAN, |(s, _)| s)
        } else {
            tail_slope(q)
        }
    };

    let diagnostics = (0..DIAGNOSTIC_ROWS)
        .map(|i| {
            let q = q_lo + (q_hi - q_lo) * i as f64 / (DIAGNOSTIC_ROWS - 1) as f64;
            let s = tail_slope(q);
            QProbe {
                q,
                tail_slope: s,
                fitted_slope: fitted_slope(q),
                in_j: s > DIVERGENCE_SLOPE_THRESHOLD,
            }
        })
        .collect();

    let (j_class, q0) = if tail_slope(q_lo) > DIVERGENCE_SLOPE_THRESHOLD {
        (JClass::AllReals, f64::NEG_INFINITY)
    } else if tail_slope(q_hi) <= DIVERGENCE_SLOPE_THRESHOLD {
        (JClass::Empty, f64::INFINITY)
    } else {
        let resolution = (q_hi - q_lo) / 1024.0;
        let (mut lo, mut hi) = (q_lo, q_hi);
        if tail_slope(lo) > 0.0 {
            hi = lo;
        }
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if tail_slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q0 = 0.5 * (lo + hi);
        (JClass::HalfLine { q0 }, q0)
    };
    Ok(QZeroEstimate {
        j_class,
        q0,
        diagnostics,
    })
}

fn check_probe_grid(t_grid: &[f64]) -> Result<(), ForcingError> {
    if t_grid.len() < 8 {
        return Err(ForcingError::InsufficientGrid(format!(
            "need at least 8 probe times, got {}",
            t_grid.len()
        )));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(ForcingError::InsufficientGrid("probe times must be positive".into()));
    }
    let ratio = t_grid[1] / t_grid[0];
    if ratio < 2.0 * (1.0 - 1e-12) {
        return Err(ForcingError::InsufficientGrid(format!(
            "probe ratio must be at least 2, got {ratio}"
        )));
    }
    if t_grid.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return Err(ForcingError::InsufficientGrid("probe grid must be geometric".into()));
    }
    Ok(())
}

/// Quadrature values of `∫_a^b g(s)ψ(λs) ds` for each `λ`.
///
/// As `λ → ∞` these approach `mean(ψ)·∫_a^b g` with an `O(1/λ)` defect for
/// `C¹` functions `g`.
pub fn riemann_lebesgue_average<G: Fn(f64) -> f64>(
    g: G,
    psi: &Periodic,
    (a, b): (f64, f64),
    lambda_grid: &[f64],
) -> Result<Vec<(f64, f64)>, ForcingError> {
    if !(b > a) {
        return Err(ForcingError::QuadratureFailure(format!("empty interval [{a}, {b}]")));
    }
    if !(psi.period > 0.0) {
        return Err(ForcingError::InvalidProfile("period must be positive".into()));
    }
    psi.shape.validate()?;
    lambda_grid
        .iter()
        .map(|&lambda| {
            let oscillations = lambda.abs() * (b - a) / psi.period;
            let panels = ((64.0 * oscillations).ceil() as usize).max(2000);
            let v = quad::simpson(|s| g(s) * psi.eval(lambda * s), a, b, panels);
            if v.is_finite() {
                Ok((lambda, v))
            } else {
                Err(ForcingError::QuadratureFailure(format!(
                    "non-finite value at λ = {lambda}"
                )))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_a(&ForcingProfile::constant(1.0), 7.0).unwrap(), 1.0);
        assert!((eval_a(&ForcingProfile::power(2.0, 1.0), 3.0).unwrap() - 6.0).abs() < 1e-15);
        let cos2 = ForcingProfile::periodic(PeriodicShape::CosSquared, PI);
        assert!((eval_a(&cos2, PI).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let c = ForcingProfile::constant(1.0);
        assert_eq!(eval_a(&c, 0.0), Err(ForcingError::NonPositiveTime(0.0)));
        let s = ForcingProfile::Sampled {
            points: vec![[1.0, 0.0], [2.0, 4.0]],
        };
        assert!((eval_a(&s, 1.25).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(eval_a(&s, 3.0), Err(ForcingError::OutsideSampleRange { .. })));
        let unsorted = ForcingProfile::Sampled {
            points: vec![[1.0, 0.0], [1.0, 4.0]],
        };
        assert!(matches!(eval_a(&unsorted, 1.0), Err(ForcingError::InvalidProfile(_))));
        let negative = ForcingProfile::periodic(PeriodicShape::Sine, 1.0);
        assert!(matches!(eval_a(&negative, 1.0), Err(ForcingError::InvalidProfile(_))));
    }

    #[test]
    fn cesaro_examples() {
        let c = cesaro_mean(&ForcingProfile::constant(3.5), 12.0, &q()).unwrap();
        assert!((c - 3.5).abs() < 1e-12);
        let p = cesaro_mean(&ForcingProfile::power(1.0, 1.0), 4.0, &q()).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
        let cos2 = ForcingProfile::periodic(PeriodicShape::CosSquared, PI);
        let a = cesaro_mean(&cos2, 1e4, &q()).unwrap();
        assert!((a - 0.5).abs() < 1e-3);
    }

    #[test]
    fn cesaro_of_integrable_singularity() {
        // (1/t)∫₀ᵗ s^{-1/2} = 2 t^{-1/2}
        let a = cesaro_mean(&ForcingProfile::power(1.0, -0.5), 4.0, &q()).unwrap();
        assert!((a - 1.0).abs() < 1e-7, "{a}");
        let a = cesaro_mean(&ForcingProfile::power(1.0, -0.9), 1.0, &q()).unwrap();
        assert!((a - 10.0).abs() < 1e-5, "{a}");
    }

    #[test]
    fn cesaro_rejects_non_integrable_singularity() {
        let r = cesaro_mean(&ForcingProfile::power(1.0, -1.0), 2.0, &q());
        assert!(matches!(r, Err(ForcingError::QuadratureFailure(_))));
    }

    #[test]
    fn sampled_integral_is_exact_for_the_interpolant() {
        let s = ForcingProfile::Sampled {
            points: vec![[0.0, 0.0], [1.0, 2.0], [3.0, 2.0]],
        };
        assert!((cesaro_mean(&s, 3.0, &q()).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!((cesaro_mean(&s, 0.5, &q()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ell_examples() {
        let sin2 = ForcingProfile::periodic(PeriodicShape::SinSquared, PI);
        assert_eq!(classify_ell(&sin2, 1e3, &q()).ell_class, EllClass::Finite(0.5));
        let t2 = ForcingProfile::power(1.0, 2.0);
        assert_eq!(classify_ell(&t2, 1e3, &q()).ell_class, EllClass::Infinite);
        let decay = ForcingProfile::exp_growth(Sign::Minus, 1.0);
        let est = classify_ell(&decay, 1e3, &q());
        assert_eq!(est.ell_class, EllClass::Zero);
        assert_eq!(est.samples.len(), ELL_PROBES);
        assert!(est.samples.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn ell_trend_for_sampled_profiles() {
        let flat = ForcingProfile::Sampled {
            points: (0..=2000).map(|i| [i as f64, 2.0]).collect(),
        };
        assert!(matches!(classify_ell(&flat, 2000.0, &q()).ell_class, EllClass::Finite(v) if (v - 2.0).abs() < 1e-12));
        let growing = ForcingProfile::Sampled {
            points: (0..=2000).map(|i| [i as f64, i as f64]).collect(),
        };
        assert_eq!(classify_ell(&growing, 2000.0, &q()).ell_class, EllClass::Infinite);
        let pulse = ForcingProfile::Sampled {
            points: vec![[0.0, 1.0], [1.0, 0.0], [5000.0, 0.0]],
        };
        assert_eq!(classify_ell(&pulse, 5000.0, &q()).ell_class, EllClass::Zero);
        // Beyond the sample range there is nothing to classify.
        assert_eq!(classify_ell(&pulse, 1e5, &q()).ell_class, EllClass::Undetermined);
    }

    #[test]
    fn window_examples() {
        let w = Window::default();
        let c = window_integral(&ForcingProfile::constant(1.0), 6.0, w, &q()).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let p = window_integral(&ForcingProfile::power(1.0, 1.0), 6.0, w, &q()).unwrap();
        assert!((p - 3.5).abs() < 1e-12);
        let e = window_integral(&ForcingProfile::exp_growth(Sign::Minus, 1.0), 200.0, w, &q()).unwrap();
        assert!((0.0..1e-40).contains(&e));
    }

    #[test]
    fn log_window_matches_quadrature_where_representable() {
        let w = Window::default();
        for sign in [Sign::Plus, Sign::Minus] {
            let prof = ForcingProfile::exp_growth(sign, 0.7);
            let direct = window_integral(&prof, 12.0, w, &q()).unwrap().ln();
            let closed = prof.log_integral(6.0, 8.0, &q()).unwrap();
            assert!((direct - closed).abs() < 1e-8, "{direct} vs {closed}");
        }
    }

    #[test]
    fn q0_examples() {
        let grid = default_probe_grid();
        let w = Window::default();
        let est = |p: ForcingProfile| q0_estimate(&p, &grid, (-10.0, 10.0), w, &q()).unwrap();
        match est(ForcingProfile::power(1.0, -1.0)).j_class {
            JClass::HalfLine { q0 } => assert!(q0.abs() < 0.05, "{q0}"),
            other => panic!("{other:?}"),
        }
        match est(ForcingProfile::power(1.0, 1.0)).j_class {
            JClass::HalfLine { q0 } => assert!((q0 + 2.0).abs() < 0.05, "{q0}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            est(ForcingProfile::exp_growth(Sign::Plus, 1.0)).j_class,
            JClass::AllReals
        );
        let empty = est(ForcingProfile::exp_growth(Sign::Minus, 1.0));
        assert_eq!(empty.j_class, JClass::Empty);
        assert_eq!(empty.q0, f64::INFINITY);
    }

    #[test]
    fn q0_rejects_bad_grids() {
        let p = ForcingProfile::constant(1.0);
        let w = Window::default();
        let short = geometric_grid(1.0, 7);
        assert!(matches!(
            q0_estimate(&p, &short, (-1.0, 1.0), w, &q()),
            Err(ForcingError::InsufficientGrid(_))
        ));
        let dense = (1..20).map(|k| k as f64).collect::<Vec<_>>();
        assert!(matches!(
            q0_estimate(&p, &dense, (-1.0, 1.0), w, &q()),
            Err(ForcingError::InsufficientGrid(_))
        ));
        let ok = default_probe_grid();
        assert!(matches!(
            q0_estimate(&p, &ok, (1.0, -1.0), w, &q()),
            Err(ForcingError::InsufficientGrid(_))
        ));
    }

    #[test]
    fn riemann_lebesgue_examples() {
        let cos2 = Periodic::new(PeriodicShape::CosSquared, PI);
        let v = riemann_lebesgue_average(|_| 1.0, &cos2, (0.0, 1.0), &[1e3]).unwrap();
        assert!((v[0].1 - 0.5).abs() < 1e-2);
        let sine = Periodic::new(PeriodicShape::Sine, 2.0 * PI);
        let v = riemann_lebesgue_average(|_| 1.0, &sine, (0.0, 2.0 * PI), &[1e3]).unwrap();
        assert!(v[0].1.abs() < 1e-2);
        let v = riemann_lebesgue_average(|s| s, &cos2, (0.0, 2.0), &[1e3]).unwrap();
        assert!((v[0].1 - 1.0).abs() < 1e-2);
        assert!(riemann_lebesgue_average(|s| s, &cos2, (1.0, 1.0), &[1.0]).is_err());
    }
}
