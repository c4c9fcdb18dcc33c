use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heatlab::exponents::Verdict;
use heatlab::solver::VerdictClass;
use heatlab_cli::commands::{self, Agreement, SweepSummary};
use heatlab_cli::config::{parse_config, ExperimentConfig};
use heatlab_cli::io::{read_json, read_trace_dir, write_trace_dir};
use heatlab_cli::CliError;

const MINIMAL: &str = r#"
[problem]
N = 1
alpha = 0.0
p = 2.0
R_max = 6.0
T_end = 1.0
forcing = { family = "constant", value = 1.0 }
w = { family = "gaussian", amplitude = 1.0, width = 1.0 }
u0 = { family = "zero" }

[solver]
cells = 64
"#;

fn heatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .output()
        .expect("spawn heatlab")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn with_sweep(extra: &str) -> String {
    format!("{MINIMAL}\n[sweep]\n{extra}\n")
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
    assert_eq!(cfg.problem.dim, 1);
    assert_eq!(cfg.solver.cells, 64);
    assert_eq!(cfg.solver.u_max, 1e8);
    assert!(cfg.verification.weak_form && cfg.verification.scaling);
    assert!(cfg.sweep.is_none());
    assert_eq!(cfg.output_dir, Path::new("heatlab-out"));
}

#[test]
fn p_below_one_is_a_validation_error() {
    let text = MINIMAL.replace("p = 2.0", "p = 0.5");
    match ExperimentConfig::from_toml_str(&text) {
        Err(CliError::Validation(m)) => assert!(m.contains("p must exceed 1"), "{m}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn unknown_key_is_a_parse_error_with_location() {
    let text = MINIMAL.replace("alpha = 0.0", "alpha = 0.0\ngamma = 3.0");
    match ExperimentConfig::from_toml_str(&text) {
        Err(CliError::Parse(m)) => {
            assert!(m.contains("gamma"), "{m}");
            assert!(m.contains("line"), "{m}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    let nested = MINIMAL.replace("cells = 64", "cells = 64\nstride = 2");
    assert!(matches!(
        ExperimentConfig::from_toml_str(&nested),
        Err(CliError::Parse(_))
    ));
}

#[test]
fn toml_round_trip_and_json_configs() {
    let cfg = ExperimentConfig::from_toml_str(&with_sweep("p = [1.5, 2.0]")).unwrap();
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(cfg, back);
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json_str(&json).unwrap(), cfg);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, &json).unwrap();
    assert_eq!(parse_config(&path).unwrap(), cfg);
}

#[test]
fn empty_sweep_axes_are_rejected() {
    for extra in ["p = []", ""] {
        let err = ExperimentConfig::from_toml_str(&with_sweep(extra)).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)), "{extra:?}: {err:?}");
    }
}

#[test]
fn trace_directory_round_trips_exactly() {
    let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
    let (trace, verdict) = commands::run_solve(&cfg, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_trace_dir(dir.path(), &trace, &verdict).unwrap();
    let (back, v) = read_trace_dir(dir.path()).unwrap();
    assert_eq!(back.times, trace.times);
    assert_eq!(back.snapshots, trace.snapshots);
    assert_eq!(back.supnorm_history, trace.supnorm_history);
    assert_eq!(back.dt_history, trace.dt_history);
    assert_eq!(back.boundary_history, trace.boundary_history);
    assert_eq!(back.problem, trace.problem);
    assert_eq!(v.unwrap(), verdict);
}

#[test]
fn perturbation_depends_only_on_seed() {
    let mut cfg = ExperimentConfig::from_toml_str(&MINIMAL.replace(
        r#"u0 = { family = "zero" }"#,
        r#"u0 = { family = "gaussian", amplitude = 0.5, width = 1.0 }"#,
    ))
    .unwrap();
    cfg.perturbation = Some(heatlab_cli::config::Perturbation {
        relative_amplitude: 0.1,
    });
    let a = commands::initial_data(&cfg.problem, &cfg.solver, cfg.perturbation.as_ref(), 5).unwrap();
    let b = commands::initial_data(&cfg.problem, &cfg.solver, cfg.perturbation.as_ref(), 5).unwrap();
    let c = commands::initial_data(&cfg.problem, &cfg.solver, cfg.perturbation.as_ref(), 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (i, v) in a.iter().enumerate() {
        let base = cfg
            .problem
            .u0
            .eval(i as f64 * cfg.problem.r_max / cfg.solver.cells as f64);
        assert!((v - base).abs() <= 0.1 * base + 1e-15);
    }
}

#[test]
fn sweep_predictions_follow_the_critical_exponent() {
    let text = with_sweep("p = [1.5, 2.0, 2.5]")
        .replace("N = 1", "N = 3")
        .replace("R_max = 6.0", "R_max = 10.0")
        .replace("T_end = 1.0", "T_end = 0.5");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let map = commands::run_sweep(&cfg, 2, 0).unwrap();
    assert_eq!(map.rows.len(), 3);
    for row in &map.rows {
        assert!(row.predicted.predicts_blowup(), "p = {}: {:?}", row.p, row.predicted);
        assert!(matches!(row.observed.class, VerdictClass::GlobalUpTo { .. }));
        assert_eq!(row.agreement, Agreement::HorizonLimited);
    }
}

#[test]
fn decaying_forcing_is_outside_the_theorems() {
    let text = with_sweep(r#"forcing = [{ family = "exp-growth", sign = "minus", rate = 1.0 }]"#)
        .replace("[sweep]", "[sweep]\np = [1.5, 2.0, 3.0]");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let map = commands::run_sweep(&cfg, 3, 0).unwrap();
    assert_eq!(map.rows.len(), 3);
    for row in &map.rows {
        assert!(
            matches!(row.predicted.verdict, Verdict::OutsideTheorems { .. }),
            "{:?}",
            row.predicted
        );
        assert_ne!(row.agreement, Agreement::Agree);
    }
}

#[test]
fn failing_sweep_point_becomes_an_inconclusive_row() {
    // the sampled forcing stops short of T_end, so only that point fails
    let text = with_sweep(
        r#"forcing = [{ family = "constant", value = 1.0 }, { family = "sampled", points = [[0.0, 1.0], [0.5, 1.0]] }]"#,
    );
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let map = commands::run_sweep(&cfg, 2, 0).unwrap();
    assert_eq!(map.rows.len(), 2);
    assert!(matches!(map.rows[0].observed.class, VerdictClass::GlobalUpTo { .. }));
    assert_eq!(map.rows[1].agreement, Agreement::Inconclusive);
    match &map.rows[1].observed.class {
        VerdictClass::Inconclusive { reason } => {
            assert!(reason.contains("sampled") || reason.contains("cover"), "{reason}")
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // 64 cells under-resolve the R_max/8 cutoff; verification needs a finer grid
    let good = write_config(dir.path(), "good.toml", &MINIMAL.replace("cells = 64", "cells = 256"));
    let coarse = write_config(dir.path(), "coarse.toml", MINIMAL);
    let bad_p = write_config(dir.path(), "bad.toml", &MINIMAL.replace("p = 2.0", "p = 0.5"));
    let unknown = write_config(
        dir.path(),
        "unknown.toml",
        &MINIMAL.replace("alpha = 0.0", "alpha = 0.0\ngamma = 1"),
    );

    assert_eq!(heatlab(&["--help"]).status.code(), Some(0));
    assert_eq!(heatlab(&["--version"]).status.code(), Some(0));
    assert_eq!(heatlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(heatlab(&["--config", &bad_p, "criterion"]).status.code(), Some(1));
    assert_eq!(heatlab(&["--config", &unknown, "criterion"]).status.code(), Some(1));
    assert_eq!(heatlab(&["emit", "--kind", "bogus"]).status.code(), Some(1));
    let missing = dir.path().join("nowhere");
    assert_eq!(
        heatlab(&["verify", "--trace", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let out = dir.path().join("run");
    let solved = heatlab(&["--config", &good, "--out", out.to_str().unwrap(), "solve"]);
    assert_eq!(
        solved.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&solved.stderr)
    );
    let verified = heatlab(&["--config", &good, "verify", "--trace", out.to_str().unwrap()]);
    assert_eq!(
        verified.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&verified.stdout)
    );
    assert!(out.join("report.json").exists() && out.join("functionals.csv").exists());

    let strict = write_config(
        dir.path(),
        "strict.toml",
        &format!(
            "{}\n[verification]\nweak_form_tol = 1e-300\n",
            MINIMAL.replace("cells = 64", "cells = 256")
        ),
    );
    let failed = heatlab(&["--config", &strict, "verify", "--trace", out.to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("weak-form"));

    let coarse_out = dir.path().join("coarse");
    assert_eq!(
        heatlab(&["--config", &coarse, "--out", coarse_out.to_str().unwrap(), "solve"])
            .status
            .code(),
        Some(0)
    );
    let under = heatlab(&["--config", &coarse, "verify", "--trace", coarse_out.to_str().unwrap()]);
    assert_eq!(under.status.code(), Some(3));
}

#[test]
fn exponents_subcommand_prints_json() {
    let out = heatlab(&["exponents", "--dim", "3", "--alpha", "-1", "--m", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["p_fujita"], 4.0 / 3.0);
    assert_eq!(v["p_upper"], 2.0);
    assert_eq!(v["m_alpha_exponent"], 2.0);
    let one_d = heatlab(&["exponents", "--dim", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&one_d.stdout).unwrap();
    assert_eq!(v["p_upper"], "inf");
}

#[test]
fn emit_kinds_write_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_sweep("p = [1.5, 2.0, 2.5]\nalpha = [0.0, 0.5, 1.0]");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let sweep_dir = dir.path().join("sweep");
    let summary = commands::sweep_to_dir(&cfg, 2, 0, &sweep_dir).unwrap();
    assert_eq!(summary.points, 9);
    let again: SweepSummary = read_json(&sweep_dir.join("summary.json")).unwrap();
    assert_eq!(again.rows.len(), 9);

    let out = dir.path().join("plots");
    let grid = commands::emit("regime-grid", Some(&sweep_dir), Some(&cfg), &out).unwrap();
    let text = fs::read_to_string(&grid).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,alpha,predicted,observed,t_b");
    assert_eq!(lines.len(), 10);
    let first = fs::read(&grid).unwrap();
    commands::emit("regime-grid", Some(&sweep_dir), Some(&cfg), &out).unwrap();
    assert_eq!(fs::read(&grid).unwrap(), first);

    let (trace, verdict) = commands::run_solve(&cfg, 0).unwrap();
    let trace_dir = dir.path().join("trace");
    write_trace_dir(&trace_dir, &trace, &verdict).unwrap();
    let sup = commands::emit("supnorm-vs-time", Some(&trace_dir), Some(&cfg), &out).unwrap();
    let mut rdr = csv::Reader::from_path(&sup).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t", "supnorm"]);
    let ts: Vec<f64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert!(ts.len() > 2 && ts.windows(2).all(|w| w[1] > w[0]));

    let ft = commands::emit("functional-traces", Some(&trace_dir), Some(&cfg), &out).unwrap();
    let mut rdr = csv::Reader::from_path(&ft).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["R", "t", "F", "G", "H", "K"]);

    let sc = commands::emit("scaling-loglog", None, Some(&cfg), &out).unwrap();
    let mut rdr = csv::Reader::from_path(&sc).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["log_R", "log_A", "log_T", "log_B"]);
    assert_eq!(rdr.records().count(), 5);

    assert!(matches!(
        commands::emit("histogram", None, Some(&cfg), &out),
        Err(CliError::UnknownKind(_))
    ));
}
