//! Experiment configuration: TOML (or JSON, by `.json` extension) with
//! nested sections. Unknown keys are rejected everywhere.
//!
//! ```toml
//! output_dir = "runs/n1"
//! seed = 7
//!
//! [problem]
//! dim = 1              # alias N
//! alpha = 0.0
//! p = 2.0
//! r_max = 6.0          # alias R_max
//! t_end = 10.0         # alias T_end
//! forcing = { family = "constant", value = 1.0 }
//! w = { family = "gaussian", amplitude = 1.0, width = 1.0 }
//! u0 = { family = "zero" }
//!
//! [solver]             # every key optional
//! cells = 512
//!
//! [sweep]              # at least one axis; each given axis nonempty
//! p = [1.5, 2.0, 2.5]
//! alpha = [0.0]
//! forcing = [{ family = "exp-growth", sign = "minus", rate = 1.0 }]
//! ```

use std::path::{Path, PathBuf};

use heatlab::forcing::{ForcingProfile, Window};
use heatlab::quad::QuadConfig;
use heatlab::solver::{ProblemSpec, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the initial-data perturbations.
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub verification: VerificationToggles,
    #[serde(default)]
    pub classification: ClassificationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("heatlab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, alias = "forcing-params", skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Vec<ForcingProfile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationToggles {
    pub weak_form: bool,
    pub holder_step1: bool,
    pub holder_step5: bool,
    pub decomposition: bool,
    pub trends: bool,
    pub scaling: bool,
    /// Cutoff radii; defaults to `{R_max/8, R_max/4}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Anchor of `K_R`; defaults to the first snapshot after `t = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// `T` of the space-time cutoff; defaults to the last snapshot time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_t: Option<f64>,
    /// Largest `θ` the spatial cutoff must certify.
    pub theta_max: f64,
    pub weak_form_tol: f64,
    /// Relative residual allowed in the space-time integral identity.
    pub identity_tol: f64,
    pub scaling_r: Vec<f64>,
    pub scaling_t: Vec<f64>,
    pub scaling_tol: f64,
}

impl Default for VerificationToggles {
    fn default() -> Self {
        Self {
            weak_form: true,
            holder_step1: true,
            holder_step5: true,
            decomposition: true,
            trends: true,
            scaling: true,
            radii: None,
            t0: None,
            decomposition_t: None,
            theta_max: 0.75,
            weak_form_tol: 1e-3,
            identity_tol: 1e-3,
            scaling_r: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            scaling_t: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            scaling_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassificationConfig {
    /// Horizon of the Cesàro mean probes.
    pub t_max: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// `(λ, µ)` of the divergence window `(λT, µT)`.
    pub window: Window,
    pub quad: QuadConfig,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            q_lo: -10.0,
            q_hi: 10.0,
            window: Window::default(),
            quad: QuadConfig::default(),
        }
    }
}

/// Multiplicative noise `u0(r_i)·(1 + ε ξ_i)` with `ξ_i` uniform in
/// `[−1, 1]`, drawn from the configured seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub relative_amplitude: f64,
}

impl ExperimentConfig {
    pub fn minimal(problem: ProblemSpec) -> Self {
        Self {
            output_dir: default_output_dir(),
            seed: 0,
            problem,
            solver: SolverConfig::default(),
            sweep: None,
            verification: VerificationToggles::default(),
            classification: ClassificationConfig::default(),
            perturbation: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(CliError::Validation(m));
        self.problem
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        self.solver
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        let v = &self.verification;
        if !(v.theta_max > 0.0 && v.theta_max < 1.0) {
            return invalid(format!(
                "verification.theta_max must lie in (0, 1), got {}",
                v.theta_max
            ));
        }
        if let Some(radii) = &v.radii {
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                return invalid("verification.radii must be a nonempty list of positive radii".into());
            }
        }
        if !(v.weak_form_tol > 0.0 && v.identity_tol > 0.0 && v.scaling_tol > 0.0) {
            return invalid("verification tolerances must be positive".into());
        }
        let c = &self.classification;
        if !(c.t_max > 0.0 && c.q_lo < c.q_hi) || !c.quad.is_valid() {
            return invalid("classification needs t_max > 0, q_lo < q_hi and a valid quadrature".into());
        }
        if !(c.window.lower > 0.0 && c.window.lower < c.window.upper) {
            return invalid("classification.window needs 0 < lower < upper".into());
        }
        if let Some(pert) = &self.perturbation {
            if !(pert.relative_amplitude >= 0.0 && pert.relative_amplitude < 1.0) {
                return invalid("perturbation.relative_amplitude must lie in [0, 1)".into());
            }
        }
        Ok(())
    }
}

impl SweepAxes {
    pub fn validate(&self) -> Result<()> {
        let mut any = false;
        for (name, len) in [
            ("p", self.p.as_ref().map(Vec::len)),
            ("alpha", self.alpha.as_ref().map(Vec::len)),
            ("forcing", self.forcing.as_ref().map(Vec::len)),
        ] {
            match len {
                Some(0) => return Err(CliError::Validation(format!("sweep axis {name} is empty"))),
                Some(_) => any = true,
                None => {}
            }
        }
        if !any {
            return Err(CliError::Validation("sweep section has no axes".into()));
        }
        Ok(())
    }
}

/// Reads and validates a config file; `.json` files are parsed as JSON,
/// anything else as TOML.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        ExperimentConfig::from_json_str(&text)
    } else {
        ExperimentConfig::from_toml_str(&text)
    };
    parsed.map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
