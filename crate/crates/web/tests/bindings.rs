use heatlab_web::{criterion_impl, cutoffs_impl, exponents_impl, solve_impl};
use serde_json::Value;

const PROBLEM: &str = r#"{
  "dim": 1, "alpha": 0.0, "p": 2.0, "r_max": 6.0, "t_end": 5.0,
  "forcing": {"family": "constant", "value": 1.0},
  "w": {"family": "gaussian", "amplitude": 1.0, "width": 1.0},
  "u0": {"family": "zero"}
}"#;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn exponents_for_three_dimensions() {
    let v = parse(&exponents_impl(3, 0.0).unwrap());
    assert_eq!(v["p_upper"], 3.0);
    assert!(exponents_impl(0, 0.0).is_err());
}

#[test]
fn criterion_predicts_blowup_for_constant_forcing() {
    let v = parse(&criterion_impl(PROBLEM).unwrap());
    assert_eq!(v["predicts_blowup"], true);
    assert!(v["w_integral"].as_f64().unwrap() > 0.0);
    assert!(criterion_impl("{\"dim\": 1}").is_err());
}

#[test]
fn solve_curve_is_thinned_and_blows_up() {
    let v = parse(&solve_impl(PROBLEM, 128).unwrap());
    assert_eq!(v["label"], "blown-up");
    let t = v["t"].as_array().unwrap();
    assert!(t.len() <= 2001 && t.len() > 20);
    assert_eq!(t.len(), v["supnorm"].as_array().unwrap().len());
    assert_eq!(v["r"].as_array().unwrap().len(), 129);
    assert!(solve_impl(PROBLEM, 8).is_err());
}

#[test]
fn cutoff_profiles_have_plateaus() {
    let v = parse(&cutoffs_impl(2.0, 1.0, 1.0, 201).unwrap());
    let g = v["g_r"].as_array().unwrap();
    assert_eq!(g[0], 1.0);
    assert_eq!(g[200], 0.0);
    let f = v["f_t"].as_array().unwrap();
    assert_eq!(f[0], 0.0);
    assert!((f[120].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
