//! Critical exponents and the combined blow-up criterion.
//!
//! All thresholds are strict: a parameter point sitting exactly on a
//! critical exponent is reported as outside the theorems.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::forcing::{CesaroEstimate, EllClass, JClass, QZeroEstimate};

/// A real number or `+∞`, totally ordered with `+∞` on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinity => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// `x < self`, with every real below `+∞`.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            Self::Finite(v) => x < v,
            Self::Infinity => true,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b),
            (Self::Finite(_), Self::Infinity) => Some(Ordering::Less),
            (Self::Infinity, Self::Finite(_)) => Some(Ordering::Greater),
            (Self::Infinity, Self::Infinity) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ext_f64::serialize(&self.to_f64(), s)
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = ext_f64::deserialize(d)?;
        if v == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Ok(Self::Finite(v))
        }
    }
}

/// Serde adapter writing non-finite floats as the strings `"inf"`,
/// `"-inf"` and `"nan"` so they survive JSON.
pub mod ext_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("σ = {0} makes t^σ non-integrable at 0 (need σ > −1)")]
    SigmaNotLocallyIntegrable(f64),
    #[error("invalid media parameters: {0}")]
    InvalidParams(String),
    #[error("neither ℓ nor q₀ is available to decide the criterion")]
    MissingClassification,
}

/// Fujita exponent `p_F = 1 + (2 + α)/N`.
pub fn fujita_exponent(dim: u32, alpha: f64) -> f64 {
    1.0 + (2.0 + alpha) / dim as f64
}

/// Lower exponent `p_* = 1 + α/N`.
pub fn p_lower(dim: u32, alpha: f64) -> f64 {
    1.0 + alpha / dim as f64
}

/// Upper exponent `p^* = (N + α)/(N − 2)`, infinite for `N ≤ 2`.
pub fn p_upper(dim: u32, alpha: f64) -> ExtReal {
    if dim <= 2 {
        ExtReal::Infinity
    } else {
        ExtReal::Finite((dim as f64 + alpha) / (dim as f64 - 2.0))
    }
}

/// Critical exponent for `a(t) = t^σ`, `α = 0`:
/// `(N − 2σ)/(N − 2σ − 2)` for `σ < N/2 − 1`, `+∞` otherwise.
pub fn sigma_exponent(dim: u32, sigma: f64) -> Result<ExtReal, ExponentError> {
    if !(sigma > -1.0) {
        return Err(ExponentError::SigmaNotLocallyIntegrable(sigma));
    }
    Ok(m_alpha_exponent(dim, sigma, 0.0))
}

/// Critical exponent for `a(t) ~ a∞ t^m`:
/// `(N − 2m + α)/(N − 2m − 2)` for `m < N/2 − 1`, `+∞` otherwise.
pub fn m_alpha_exponent(dim: u32, m: f64, alpha: f64) -> ExtReal {
    let n = dim as f64;
    if m < n / 2.0 - 1.0 {
        ExtReal::Finite((n - 2.0 * m + alpha) / (n - 2.0 * m - 2.0))
    } else {
        ExtReal::Infinity
    }
}

/// Left side of the `q₀` condition: `(2p + α)/(2(p − 1)) − N/2 − 1`.
pub fn halfline_lhs(dim: u32, alpha: f64, p: f64) -> f64 {
    (2.0 * p + alpha) / (2.0 * (p - 1.0)) - dim as f64 / 2.0 - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSign {
    Positive,
    NonPositive,
    Unknown,
}

impl WeightSign {
    pub fn of(integral: f64) -> Self {
        if integral.is_nan() {
            Self::Unknown
        } else if integral > 0.0 {
            Self::Positive
        } else {
            Self::NonPositive
        }
    }
}

/// `(N, α, p)` together with the sign of `∫w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediaParams {
    pub dim: u32,
    pub alpha: f64,
    pub p: f64,
    pub w_integral_sign: WeightSign,
}

impl MediaParams {
    pub fn new(dim: u32, alpha: f64, p: f64, w_integral_sign: WeightSign) -> Self {
        Self {
            dim,
            alpha,
            p,
            w_integral_sign,
        }
    }

    pub fn validate(&self) -> Result<(), ExponentError> {
        if self.dim == 0 {
            return Err(ExponentError::InvalidParams("N must be at least 1".into()));
        }
        if !(self.p > 1.0) {
            return Err(ExponentError::InvalidParams("p must exceed 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(ExponentError::InvalidParams("α must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub p_fujita: f64,
    pub p_lower: f64,
    pub p_upper: ExtReal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_exponent: Option<ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_alpha_exponent: Option<ExtReal>,
}

/// Collects every closed-form exponent for `(N, α)`, plus the `t^σ` and
/// `t^m` exponents when those parameters are given.
pub fn exponent_report(
    dim: u32,
    alpha: f64,
    sigma: Option<f64>,
    m: Option<f64>,
) -> Result<ExponentReport, ExponentError> {
    if dim == 0 {
        return Err(ExponentError::InvalidParams("N must be at least 1".into()));
    }
    Ok(ExponentReport {
        p_fujita: fujita_exponent(dim, alpha),
        p_lower: p_lower(dim, alpha),
        p_upper: p_upper(dim, alpha),
        sigma_exponent: sigma.map(|s| sigma_exponent(dim, s)).transpose()?,
        m_alpha_exponent: m.map(|m| m_alpha_exponent(dim, m, alpha)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremTag {
    /// `0 < ℓ < ∞` and `p_* < p < p^*`.
    EllFinite,
    /// `ℓ = ∞` and `p > p_*`.
    EllInfinite,
    /// `J = ℝ` and `p > p_*`.
    JAllReals,
    /// `J = (q₀, ∞)` and `(2p + α)/(2(p − 1)) − N/2 − 1 > q₀`.
    JHalfLine,
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EllFinite => "thm-ell-finite",
            Self::EllInfinite => "thm-ell-infinite",
            Self::JAllReals => "thm-j-allreals",
            Self::JHalfLine => "thm-j-halfline",
        })
    }
}

/// One hypothesis of one theorem, evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub theorem: TheoremTag,
    pub hypothesis: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    BlowupPredicted { theorem: TheoremTag },
    OutsideTheorems { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub verdict: Verdict,
    /// Every hypothesis considered, in evaluation order.
    pub checklist: Vec<HypothesisCheck>,
}

impl CriterionVerdict {
    pub fn predicts_blowup(&self) -> bool {
        matches!(self.verdict, Verdict::BlowupPredicted { .. })
    }
}

/// Applies the nonexistence theorems in the order ℓ-finite, ℓ-infinite,
/// J-based and reports the first that applies.
///
/// When none applies the verdict names the first failing hypothesis of the
/// earliest theorem whose forcing class matched, or the first failing
/// hypothesis overall.
pub fn blowup_criterion(
    params: &MediaParams,
    ell: &CesaroEstimate,
    q0: Option<&QZeroEstimate>,
) -> Result<CriterionVerdict, ExponentError> {
    params.validate()?;
    if ell.ell_class == EllClass::Undetermined && q0.is_none() {
        return Err(ExponentError::MissingClassification);
    }
    let MediaParams { dim, alpha, p, .. } = *params;
    let lower = p_lower(dim, alpha);
    let upper = p_upper(dim, alpha);
    let w_positive = params.w_integral_sign == WeightSign::Positive;

    let mut checklist = Vec::new();
    let mut push = |theorem, hypothesis: String, holds: bool| {
        checklist.push(HypothesisCheck {
            theorem,
            hypothesis,
            holds,
        });
        holds
    };

    let w_text = "∫w > 0".to_string();
    let mut candidates: Vec<(TheoremTag, bool)> = Vec::new();

    // ℓ finite
    {
        let t = TheoremTag::EllFinite;
        let class_ok = push(
            t,
            format!("0 < ℓ < ∞ (ℓ class {})", describe_ell(ell.ell_class)),
            matches!(ell.ell_class, EllClass::Finite(v) if v > 0.0 && v.is_finite()),
        );
        let w_ok = push(t, w_text.clone(), w_positive);
        let lo_ok = push(t, format!("p = {p} > p_* = {lower}"), p > lower);
        let hi_ok = push(t, format!("p = {p} < p^* = {upper}"), upper.exceeds(p));
        candidates.push((t, class_ok && w_ok && lo_ok && hi_ok));
    }
    // ℓ infinite
    {
        let t = TheoremTag::EllInfinite;
        let class_ok = push(t, "ℓ = ∞".into(), ell.ell_class == EllClass::Infinite);
        let w_ok = push(t, w_text.clone(), w_positive);
        let lo_ok = push(t, format!("p = {p} > p_* = {lower}"), p > lower);
        candidates.push((t, class_ok && w_ok && lo_ok));
    }
    // J based
    if let Some(q0) = q0 {
        match q0.j_class {
            JClass::AllReals => {
                let t = TheoremTag::JAllReals;
                let class_ok = push(t, "J = ℝ".into(), true);
                let w_ok = push(t, w_text.clone(), w_positive);
                let lo_ok = push(t, format!("p = {p} > p_* = {lower}"), p > lower);
                candidates.push((t, class_ok && w_ok && lo_ok));
            }
            JClass::HalfLine { q0 } => {
                let t = TheoremTag::JHalfLine;
                let lhs = halfline_lhs(dim, alpha, p);
                let class_ok = push(t, format!("J = (q₀, ∞), q₀ = {q0}"), true);
                let w_ok = push(t, w_text.clone(), w_positive);
                let gen_ok = push(t, format!("(2p+α)/(2(p−1)) − N/2 − 1 = {lhs} > q₀ = {q0}"), lhs > q0);
                candidates.push((t, class_ok && w_ok && gen_ok));
            }
            JClass::Empty => {
                push(TheoremTag::JHalfLine, "J ≠ ∅".into(), false);
                candidates.push((TheoremTag::JHalfLine, false));
            }
        }
    }

    if let Some((theorem, _)) = candidates.iter().find(|(_, ok)| *ok) {
        return Ok(CriterionVerdict {
            verdict: Verdict::BlowupPredicted { theorem: *theorem },
            checklist,
        });
    }
    let reason = first_failure(&checklist);
    Ok(CriterionVerdict {
        verdict: Verdict::OutsideTheorems { reason },
        checklist,
    })
}

fn first_failure(checklist: &[HypothesisCheck]) -> String {
    // Prefer a theorem whose forcing-class hypothesis (its first entry) held.
    let mut theorems: Vec<TheoremTag> = Vec::new();
    for c in checklist {
        if !theorems.contains(&c.theorem) {
            theorems.push(c.theorem);
        }
    }
    for t in &theorems {
        let rows: Vec<&HypothesisCheck> = checklist.iter().filter(|c| c.theorem == *t).collect();
        if rows.first().is_some_and(|r| r.holds) {
            if let Some(fail) = rows.iter().find(|r| !r.holds) {
                return format!("{t}: {} fails", fail.hypothesis);
            }
        }
    }
    checklist
        .iter()
        .find(|c| !c.holds)
        .map(|c| format!("{}: {} fails", c.theorem, c.hypothesis))
        .unwrap_or_else(|| "no theorem applies".into())
}

fn describe_ell(class: EllClass) -> String {
    match class {
        EllClass::Zero => "zero".into(),
        EllClass::Finite(v) => format!("finite({v})"),
        EllClass::Infinite => "infinite".into(),
        EllClass::Undetermined => "undetermined".into(),
    }
}
