use std::fs;
use std::path::{Path, PathBuf};

use heatlab::cutoffs::{build_phi, build_spacetime_cutoffs, CutoffFamily};
use heatlab::exponents::{
    blowup_criterion, exponent_report, CriterionVerdict, ExponentReport, MediaParams, Verdict, WeightSign,
};
use heatlab::forcing::{classify_ell, default_probe_grid, q0_estimate, CesaroEstimate, ForcingProfile, QZeroEstimate};
use heatlab::solver::{solve_with_initial, BlowupVerdict, ProblemSpec, SolutionTrace, SolverConfig, VerdictClass};
use heatlab::verification::{
    compute_functionals, decomposition_report, holder_check_step1, holder_check_step5, scaling_fit, trend_report,
    weak_form_residual, weight_mass_convergence, FunctionalTrace, VerificationError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ClassificationConfig, ExperimentConfig, Perturbation};
use crate::error::{CliError, Result};
use crate::io::{read_json, read_trace_dir, write_json, write_trace_dir};

pub fn exponents(dim: u32, alpha: f64, sigma: Option<f64>, m: Option<f64>) -> Result<ExponentReport> {
    exponent_report(dim, alpha, sigma, m).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingClassification {
    pub ell: CesaroEstimate,
    pub q0: Option<QZeroEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0_error: Option<String>,
}

pub fn classify(profile: &ForcingProfile, cfg: &ClassificationConfig) -> ForcingClassification {
    let ell = classify_ell(profile, cfg.t_max, &cfg.quad);
    let (q0, q0_error) = match q0_estimate(
        profile,
        &default_probe_grid(),
        (cfg.q_lo, cfg.q_hi),
        cfg.window,
        &cfg.quad,
    ) {
        Ok(q) => (Some(q), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ForcingClassification { ell, q0, q0_error }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub params: MediaParams,
    pub w_integral: f64,
    pub classification: ForcingClassification,
    pub criterion: CriterionVerdict,
}

pub fn criterion_for(problem: &ProblemSpec, class_cfg: &ClassificationConfig) -> Result<CriterionReport> {
    let w_integral = problem.w.integral(problem.dim);
    let params = MediaParams::new(problem.dim, problem.alpha, problem.p, WeightSign::of(w_integral));
    let classification = classify(&problem.forcing, class_cfg);
    let criterion = blowup_criterion(&params, &classification.ell, classification.q0.as_ref())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(CriterionReport {
        params,
        w_integral,
        classification,
        criterion,
    })
}

/// Nodal initial data with the configured multiplicative noise.
pub fn initial_data(
    problem: &ProblemSpec,
    solver: &SolverConfig,
    pert: Option<&Perturbation>,
    seed: u64,
) -> Option<Vec<f64>> {
    let pert = pert.filter(|p| p.relative_amplitude > 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = problem.r_max / solver.cells as f64;
    Some(
        (0..=solver.cells)
            .map(|i| {
                let xi: f64 = rng.gen_range(-1.0..=1.0);
                problem.u0.eval(i as f64 * h) * (1.0 + pert.relative_amplitude * xi)
            })
            .collect(),
    )
}

pub fn run_solve(cfg: &ExperimentConfig, seed: u64) -> Result<(SolutionTrace, BlowupVerdict)> {
    let u0 = initial_data(&cfg.problem, &cfg.solver, cfg.perturbation.as_ref(), seed);
    solve_with_initial(&cfg.problem, &cfg.solver, u0).map_err(|e| match e {
        heatlab::solver::SolverError::InvalidGrid(_) | heatlab::solver::SolverError::InvalidProblem(_) => {
            CliError::Validation(e.to_string())
        }
        other => CliError::Runtime(other.to_string()),
    })
}

pub fn solve_to_dir(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<BlowupVerdict> {
    let (trace, verdict) = run_solve(cfg, seed)?;
    write_trace_dir(out, &trace, &verdict)?;
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub status: CheckStatus,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: &str, radius: Option<f64>, passed: bool, details: serde_json::Value) -> CheckResult {
    CheckResult {
        name: name.into(),
        radius,
        status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
        details,
    }
}

fn not_applicable(name: &str, radius: Option<f64>, reason: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        radius,
        status: CheckStatus::NotApplicable,
        details: json!({ "reason": reason }),
    }
}

fn verification_error(e: VerificationError) -> CliError {
    match e {
        VerificationError::Forcing(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

pub fn default_radii(trace: &SolutionTrace) -> Vec<f64> {
    vec![trace.grid.r_max / 8.0, trace.grid.r_max / 4.0]
}

fn default_t0(trace: &SolutionTrace) -> f64 {
    trace.times.get(1).copied().unwrap_or(trace.times[0])
}

pub fn functional_traces(trace: &SolutionTrace, cfg: &ExperimentConfig) -> Result<Vec<FunctionalTrace>> {
    let family = build_phi(cfg.verification.theta_max).map_err(|e| CliError::Validation(e.to_string()))?;
    let radii = cfg.verification.radii.clone().unwrap_or_else(|| default_radii(trace));
    let t0 = cfg.verification.t0.unwrap_or_else(|| default_t0(trace));
    radii
        .iter()
        .map(|&r| compute_functionals(trace, &family, r, t0).map_err(verification_error))
        .collect()
}

/// Runs every enabled check on `trace`.
pub fn verify_trace(trace: &SolutionTrace, cfg: &ExperimentConfig) -> Result<(VerifyReport, Vec<FunctionalTrace>)> {
    let v = &cfg.verification;
    let spec = &trace.problem;
    let family: CutoffFamily = build_phi(v.theta_max).map_err(|e| CliError::Validation(e.to_string()))?;
    let radii = v.radii.clone().unwrap_or_else(|| default_radii(trace));
    let functionals = functional_traces(trace, cfg)?;
    let mut checks = Vec::new();

    for &r in &radii {
        if v.weak_form {
            let wf = weak_form_residual(trace, &family, r).map_err(verification_error)?;
            checks.push(check(
                "weak-form",
                Some(r),
                wf.normalized < v.weak_form_tol,
                json!({ "normalized_residual": wf.normalized, "tolerance": v.weak_form_tol }),
            ));
        }
        if v.holder_step1 {
            checks.push(match holder_check_step1(trace, &family, r) {
                Ok(s) => check(
                    "holder-step1",
                    Some(r),
                    s.passed,
                    json!({ "min_slack": s.min_slack, "min_relative_slack": s.min_relative_slack, "tol_quad": s.tol_quad }),
                ),
                Err(e @ VerificationError::AnnulusIntegralDiverges(_)) => not_applicable("holder-step1", Some(r), e.to_string()),
                Err(e) => return Err(verification_error(e)),
            });
        }
        if v.holder_step5 {
            checks.push(match holder_check_step5(trace, &family, r) {
                Ok(s) => check(
                    "holder-step5",
                    Some(r),
                    s.passed,
                    json!({ "min_slack": s.min_slack, "min_relative_slack": s.min_relative_slack, "tol_quad": s.tol_quad }),
                ),
                Err(e @ VerificationError::IntegrabilityViolated { .. }) => {
                    not_applicable("holder-step5", Some(r), e.to_string())
                }
                Err(e) => return Err(verification_error(e)),
            });
        }
    }

    if v.trends {
        for ft in &functionals {
            let tr = trend_report(ft, spec.p, ft.t0);
            checks.push(check(
                "functional-trends",
                Some(ft.big_r),
                tr.k_monotone && tr.h_dominates_f,
                serde_json::to_value(&tr)?,
            ));
        }
        let masses = weight_mass_convergence(&spec.w, &family, spec.dim, &radii);
        let total = spec.w.integral(spec.dim);
        let gaps: Vec<f64> = masses.iter().map(|(_, m)| (m - total).abs()).collect();
        let shrinking = gaps.windows(2).all(|g| g[1] <= g[0] * (1.0 + 1e-9) + 1e-12);
        checks.push(check(
            "weight-mass-convergence",
            None,
            shrinking,
            json!({ "w_integral": total, "per_radius": masses }),
        ));
    }

    if v.decomposition {
        let horizon = *trace.times.last().expect("nonempty trace");
        let big_t = v.decomposition_t.unwrap_or(horizon);
        let big_r = radii.iter().copied().fold(0.0, f64::max);
        let cuts = build_spacetime_cutoffs(spec.p, big_t, big_r).map_err(|e| CliError::Validation(e.to_string()))?;
        match decomposition_report(trace, &cuts) {
            Ok(d) => checks.push(check(
                "decomposition",
                Some(big_r),
                d.identity_residual < v.identity_tol && d.inequality_holds,
                serde_json::to_value(&d)?,
            )),
            Err(e @ VerificationError::HorizonExceeded { .. }) => {
                checks.push(not_applicable("decomposition", Some(big_r), e.to_string()))
            }
            Err(e) => return Err(verification_error(e)),
        }
    }

    if v.scaling {
        checks.push(
            match scaling_fit(&v.scaling_r, &v.scaling_t, spec.p, spec.alpha, spec.dim) {
                Ok(fit) => check("scaling", None, fit.within(v.scaling_tol), serde_json::to_value(&fit)?),
                Err(e @ VerificationError::IntegrabilityViolated { .. }) => {
                    not_applicable("scaling", None, e.to_string())
                }
                Err(e) => return Err(verification_error(e)),
            },
        );
    }

    let all_passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok((VerifyReport { all_passed, checks }, functionals))
}

pub fn write_functionals_csv(path: &Path, functionals: &[FunctionalTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["R", "t", "F", "G", "H", "K"])?;
    for ft in functionals {
        for i in 0..ft.times.len() {
            w.write_record([ft.big_r, ft.times[i], ft.f[i], ft.g[i], ft.h[i], ft.k[i]].map(|x| format!("{x}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn verify_dir(trace_dir: &Path, cfg: Option<&ExperimentConfig>, out: &Path) -> Result<VerifyReport> {
    let (trace, _) = read_trace_dir(trace_dir)?;
    let cfg = cfg
        .cloned()
        .unwrap_or_else(|| ExperimentConfig::minimal(trace.problem.clone()));
    let (report, functionals) = verify_trace(&trace, &cfg)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &report)?;
    write_functionals_csv(&out.join("functionals.csv"), &functionals)?;
    Ok(report)
}

/// Agreement between the theorem-based prediction and the solver verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agreement {
    /// Predicted and observed blow-up.
    #[serde(rename = "agree")]
    Agree,
    /// Predicted blow-up, global up to the horizon; the theorems give no
    /// bound on the blow-up time.
    #[serde(rename = "HORIZON-LIMITED")]
    HorizonLimited,
    /// No prediction, observed blow-up.
    #[serde(rename = "beyond-theorems")]
    BeyondTheorems,
    /// No prediction, global up to the horizon.
    #[serde(rename = "silent")]
    Silent,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Agreement {
    pub fn of(predicted: &CriterionVerdict, observed: &BlowupVerdict) -> Self {
        match (predicted.predicts_blowup(), &observed.class) {
            (_, VerdictClass::Inconclusive { .. }) => Self::Inconclusive,
            (true, VerdictClass::BlownUp { .. }) => Self::Agree,
            (true, VerdictClass::GlobalUpTo { .. }) => Self::HorizonLimited,
            (false, VerdictClass::BlownUp { .. }) => Self::BeyondTheorems,
            (false, VerdictClass::GlobalUpTo { .. }) => Self::Silent,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Agree => "agree",
            Self::HorizonLimited => "HORIZON-LIMITED",
            Self::BeyondTheorems => "beyond-theorems",
            Self::Silent => "silent",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeRow {
    pub p: f64,
    pub alpha: f64,
    pub forcing: String,
    pub predicted: CriterionVerdict,
    pub observed: BlowupVerdict,
    pub t_b: Option<f64>,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeMap {
    pub rows: Vec<RegimeRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub seed: u64,
    pub points: usize,
    pub predicted_blowup: usize,
    pub observed_blowup: usize,
    pub predicted_and_observed: usize,
    pub horizon_limited: usize,
    pub beyond_theorems: usize,
    pub silent: usize,
    pub inconclusive: usize,
    pub rows: Vec<RegimeRow>,
}

/// `family:key=value;...` with keys in sorted order.
pub fn forcing_descriptor(f: &ForcingProfile) -> String {
    let value = serde_json::to_value(f).unwrap_or(serde_json::Value::Null);
    let Some(obj) = value.as_object() else {
        return "unknown".into();
    };
    let family = obj.get("family").and_then(|v| v.as_str()).unwrap_or("unknown");
    let mut params: Vec<String> = obj
        .iter()
        .filter(|(k, _)| k.as_str() != "family")
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect();
    params.sort();
    if params.is_empty() {
        family.to_string()
    } else {
        format!("{family}:{}", params.join(";"))
    }
}

fn failed_verdict(reason: String) -> BlowupVerdict {
    BlowupVerdict {
        class: VerdictClass::Inconclusive { reason },
        final_supnorm: 0.0,
        final_dt: 0.0,
        final_time: 0.0,
        steps: 0,
        boundary_contaminated: false,
    }
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn sweep_point(cfg: &ExperimentConfig, problem: ProblemSpec, seed: u64) -> RegimeRow {
    let forcing = forcing_descriptor(&problem.forcing);
    let predicted = match criterion_for(&problem, &cfg.classification) {
        Ok(r) => r.criterion,
        Err(e) => CriterionVerdict {
            verdict: Verdict::OutsideTheorems {
                reason: format!("classification failed: {e}"),
            },
            checklist: Vec::new(),
        },
    };
    let point_cfg = ExperimentConfig {
        problem: problem.clone(),
        ..cfg.clone()
    };
    let observed = match run_solve(&point_cfg, seed) {
        Ok((_, v)) => v,
        Err(e) => failed_verdict(e.to_string()),
    };
    RegimeRow {
        p: problem.p,
        alpha: problem.alpha,
        forcing,
        t_b: observed.blowup_time(),
        agreement: Agreement::of(&predicted, &observed),
        predicted,
        observed,
    }
}

pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<ProblemSpec>> {
    let axes = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("sweep needs a [sweep] section with at least one axis".into()))?;
    axes.validate()?;
    let base = &cfg.problem;
    let ps = axes.p.clone().unwrap_or_else(|| vec![base.p]);
    let alphas = axes.alpha.clone().unwrap_or_else(|| vec![base.alpha]);
    let forcings = axes.forcing.clone().unwrap_or_else(|| vec![base.forcing.clone()]);
    let mut points = Vec::with_capacity(ps.len() * alphas.len() * forcings.len());
    for &p in &ps {
        for &alpha in &alphas {
            for forcing in &forcings {
                points.push(ProblemSpec {
                    p,
                    alpha,
                    forcing: forcing.clone(),
                    ..base.clone()
                });
            }
        }
    }
    Ok(points)
}

/// Runs every sweep point on `workers` threads; rows come back in input
/// order and a failing point only affects its own row.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize, seed: u64) -> Result<RegimeMap> {
    let points = sweep_points(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(i, problem)| sweep_point(cfg, problem, point_seed(seed, i)))
            .collect()
    });
    Ok(RegimeMap { rows })
}

pub fn summarize(map: &RegimeMap, seed: u64) -> SweepSummary {
    let count = |a: Agreement| map.rows.iter().filter(|r| r.agreement == a).count();
    SweepSummary {
        seed,
        points: map.rows.len(),
        predicted_blowup: map.rows.iter().filter(|r| r.predicted.predicts_blowup()).count(),
        observed_blowup: map.rows.iter().filter(|r| r.observed.is_blown_up()).count(),
        predicted_and_observed: count(Agreement::Agree),
        horizon_limited: count(Agreement::HorizonLimited),
        beyond_theorems: count(Agreement::BeyondTheorems),
        silent: count(Agreement::Silent),
        inconclusive: count(Agreement::Inconclusive),
        rows: map.rows.clone(),
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn predicted_label(v: &CriterionVerdict) -> String {
    match &v.verdict {
        Verdict::BlowupPredicted { theorem } => format!("blowup-predicted:{theorem}"),
        Verdict::OutsideTheorems { .. } => "outside-theorems".into(),
    }
}

pub fn write_regime_csv(path: &Path, map: &RegimeMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "alpha", "forcing", "predicted", "observed", "t_b", "agreement"])?;
    for r in &map.rows {
        w.write_record([
            format!("{}", r.p),
            format!("{}", r.alpha),
            r.forcing.clone(),
            predicted_label(&r.predicted),
            r.observed.label().to_string(),
            opt_num(r.t_b),
            r.agreement.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_to_dir(cfg: &ExperimentConfig, workers: usize, seed: u64, out: &Path) -> Result<SweepSummary> {
    let map = run_sweep(cfg, workers, seed)?;
    fs::create_dir_all(out)?;
    write_regime_csv(&out.join("regime.csv"), &map)?;
    let summary = summarize(&map, seed);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub const EMIT_KINDS: [&str; 4] = ["regime-grid", "supnorm-vs-time", "functional-traces", "scaling-loglog"];

/// Writes the plot-ready CSV for `kind` into `out` and returns its path.
///
/// `regime-grid` reads a sweep directory, `supnorm-vs-time` and
/// `functional-traces` read a trace directory, `scaling-loglog` needs only
/// the config.
pub fn emit(kind: &str, input: Option<&Path>, cfg: Option<&ExperimentConfig>, out: &Path) -> Result<PathBuf> {
    if !EMIT_KINDS.contains(&kind) {
        return Err(CliError::UnknownKind(kind.to_string()));
    }
    let need_input = || input.ok_or_else(|| CliError::Validation(format!("emit {kind} needs --input <dir>")));
    fs::create_dir_all(out)?;
    let path = out.join(format!("{}.csv", kind.replace('-', "_")));
    match kind {
        "regime-grid" => {
            let summary: SweepSummary = read_json(&need_input()?.join("summary.json"))?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["p", "alpha", "predicted", "observed", "t_b"])?;
            for r in &summary.rows {
                w.write_record([
                    format!("{}", r.p),
                    format!("{}", r.alpha),
                    predicted_label(&r.predicted),
                    r.observed.label().to_string(),
                    opt_num(r.t_b),
                ])?;
            }
            w.flush()?;
        }
        "supnorm-vs-time" => {
            let (trace, _) = read_trace_dir(need_input()?)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["t", "supnorm"])?;
            for (t, s) in &trace.supnorm_history {
                w.write_record([format!("{t}"), format!("{s}")])?;
            }
            w.flush()?;
        }
        "functional-traces" => {
            let (trace, _) = read_trace_dir(need_input()?)?;
            let cfg = cfg
                .cloned()
                .unwrap_or_else(|| ExperimentConfig::minimal(trace.problem.clone()));
            write_functionals_csv(&path, &functional_traces(&trace, &cfg)?)?;
        }
        "scaling-loglog" => {
            let cfg = cfg.ok_or_else(|| CliError::Validation("emit scaling-loglog needs --config".into()))?;
            let v = &cfg.verification;
            let p = &cfg.problem;
            let fit = scaling_fit(&v.scaling_r, &v.scaling_t, p.p, p.alpha, p.dim).map_err(verification_error)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["log_R", "log_A", "log_T", "log_B"])?;
            let rows = fit.a_points.len().max(fit.b_points.len());
            for i in 0..rows {
                let a = fit.a_points.get(i);
                let b = fit.b_points.get(i);
                w.write_record([
                    opt_num(a.map(|x| x.0)),
                    opt_num(a.map(|x| x.1)),
                    opt_num(b.map(|x| x.0)),
                    opt_num(b.map(|x| x.1)),
                ])?;
            }
            w.flush()?;
        }
        _ => unreachable!("kind checked above"),
    }
    Ok(path)
}
