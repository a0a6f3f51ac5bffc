use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use reflex::config::{Experiment, ExperimentConfig};
use reflex::experiment::ExperimentResult;
use reflex::io::{read_path_csv, write_path_csv};
use reflex::replay::replay_value;
use reflex::validate::validate;
use reflex::{run, RayonExecutor, RunError};
use reflex_core::sde::{simulate_reflected, NoiseConfig};
use reflex_core::{CoefficientField, DomainSpec, Sequential};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped() -> Vec<(String, String)> {
    let mut out: Vec<_> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

const SMALL_LDP: &str = r#"
version = 1
seed = 4

[domain]
shape = "interval"
lo = -2.0
hi = 2.0

[coefficients]
preset = "zero-drift-identity"

[experiment]
kind = "ldp-curve"
initial = { kind = "deterministic", x0 = [0.0] }
event = { kind = "sup-exceeds", c = 1.0 }
epsilons = [0.5, 0.25]
n_paths = 3000
level = 7

[experiment.prediction]
control_segments = 8
opt = { restarts = 2 }
"#;

fn schema_pointer(text: &str) -> Option<String> {
    match ExperimentConfig::from_toml(text) {
        Err(RunError::Schema { pointer, .. }) => pointer,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn shipped_configs_validate_and_round_trip() {
    let all = shipped();
    assert!(all.len() >= 7);
    for (name, text) in all {
        let cfg = ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let report = validate(&cfg);
        assert!(report.ok, "{name}: {}", report.summary());
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn unknown_fields_are_rejected_with_a_pointer() {
    let text = SMALL_LDP.replace("level = 7", "level = 7\nlevle = 8");
    assert_eq!(schema_pointer(&text).as_deref(), Some("/experiment/levle"));
    let text = SMALL_LDP.replace("hi = 2.0", "hi = 2.0\nradius = 1.0");
    assert_eq!(schema_pointer(&text).as_deref(), Some("/domain/radius"));
    let text = SMALL_LDP.replace("opt = { restarts = 2 }", "opt = { restarts = 2, tries = 1 }");
    assert_eq!(schema_pointer(&text).as_deref(), Some("/experiment/prediction/opt/tries"));
}

#[test]
fn malformed_shape_and_version_are_schema_errors() {
    let text = SMALL_LDP.replace("shape = \"interval\"", "shape = \"donut\"");
    assert!(matches!(ExperimentConfig::from_toml(&text), Err(RunError::Schema { .. })));
    let text = SMALL_LDP.replace("version = 1", "version = 2");
    assert_eq!(schema_pointer(&text).as_deref(), Some("/version"));
}

#[test]
fn validation_points_at_the_offending_field() {
    let text = SMALL_LDP.replace("x0 = [0.0]", "x0 = [2.5]");
    let report = validate(&ExperimentConfig::from_toml(&text).unwrap());
    assert!(!report.ok);
    assert_eq!(report.issues[0].pointer, "/experiment/initial/x0");

    let text = SMALL_LDP.replace("epsilons = [0.5, 0.25]", "epsilons = [0.25, 0.5]");
    let report = validate(&ExperimentConfig::from_toml(&text).unwrap());
    assert_eq!(report.issues[0].pointer, "/experiment/epsilons");
}

#[test]
fn sqrt_epsilon_initial_law_is_rejected() {
    let text = SMALL_LDP.replace(
        "initial = { kind = \"deterministic\", x0 = [0.0] }",
        "initial = { kind = \"shifted\", x0 = [0.0], scale = \"sqrt-epsilon\", variate = { kind = \"gaussian\" } }",
    );
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let report = validate(&cfg);
    assert!(!report.ok);
    assert_eq!(report.issues[0].pointer, "/experiment/initial/scale");
    assert!(report.issues[0].message.contains("concentration condition"));
    assert!(matches!(run(&cfg, &Sequential), Err(RunError::Invalid(_))));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = ExperimentConfig::from_toml(SMALL_LDP).unwrap();
    let a = serde_json::to_value(run(&cfg, &Sequential).unwrap()).unwrap();
    let b = serde_json::to_value(run(&cfg, &RayonExecutor::new(3).unwrap()).unwrap()).unwrap();
    assert_eq!(a, b);
    let report = replay_value(&a, &RayonExecutor::new(2).unwrap()).unwrap();
    assert!(report.identical, "{:?}", report.divergences);
}

#[test]
fn replay_flags_a_tampered_estimate() {
    let cfg = ExperimentConfig::from_toml(SMALL_LDP).unwrap();
    let mut doc = serde_json::to_value(run(&cfg, &Sequential).unwrap()).unwrap();
    let p = doc.pointer_mut("/result/estimates/1/p_hat").unwrap();
    *p = serde_json::json!(p.as_f64().unwrap() + 1e-12);
    let report = replay_value(&doc, &Sequential).unwrap();
    assert!(!report.identical);
    assert_eq!(report.divergences, vec!["/result/estimates/1/p_hat".to_string()]);
}

#[test]
fn unreachable_rate_target_is_an_answer_not_an_error() {
    let text = r#"
version = 1
seed = 1
[domain]
shape = "interval"
lo = -2.0
hi = 2.0
[coefficients]
preset = "zero-drift-identity"
[experiment]
kind = "rate"
control_segments = 4
cases = [{ x0 = [0.0], target = { kind = "path-sup-threshold", c = 3.0 } }]
opt = { restarts = 1 }
"#;
    let doc = run(&ExperimentConfig::from_toml(text).unwrap(), &Sequential).unwrap();
    let ExperimentResult::Rate { cases } = &doc.result else { panic!() };
    assert_eq!(cases[0].result.value, None);
    assert!(!cases[0].result.feasible);
}

#[test]
fn output_dir_precedence() {
    let mut cfg = ExperimentConfig::from_toml(SMALL_LDP).unwrap();
    cfg.output.dir = Some("from-config".into());
    assert_eq!(cfg.output_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
    assert_eq!(cfg.output_dir(None), PathBuf::from("from-config"));
}

fn simulate_config(level: u32, n_paths: u64) -> ExperimentConfig {
    let mut cfg =
        ExperimentConfig::from_toml(&fs::read_to_string(configs_dir().join("simulate-interval.toml")).unwrap())
            .unwrap();
    if let Experiment::Simulate { level: l, n_paths: n, .. } = &mut cfg.experiment {
        *l = level;
        *n = n_paths;
    }
    cfg
}

#[test]
fn simulate_writes_one_csv_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulate_config(8, 3);
    let doc = run(&cfg, &Sequential).unwrap();
    let files = reflex::io::write_outputs(dir.path(), &doc).unwrap();
    let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["result.json", "results.csv", "path_0.csv", "path_1.csv", "path_2.csv"]);
    let ExperimentResult::Simulate { full, paths, .. } = &doc.result else { panic!() };
    let back = read_path_csv(&dir.path().join("path_1.csv")).unwrap();
    assert_eq!(back.state, full[1].1.state);
    assert_eq!(paths[1].final_state, back.state.last());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_csv_round_trips_states_exactly(seed in any::<u64>(), level in 3u32..9, eps in 0.05f64..4.0) {
        let domain = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let c = CoefficientField::zero_drift_identity(2);
        let z = simulate_reflected(&domain, &c, &[0.2, 0.1], &NoiseConfig::new(eps, level, seed, 0).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        write_path_csv(&p, &z, &[("seed", seed.to_string())]).unwrap();
        let back = read_path_csv(&p).unwrap();
        prop_assert_eq!(&back.state, &z.state);
        prop_assert_eq!(&back.total_variation, &z.total_variation);
        for (a, b) in back.local_time.iter().zip(&z.local_time) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

fn reflex_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reflex"))
}

#[test]
fn cli_run_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("ldp.toml");
    fs::write(&cfg_path, SMALL_LDP).unwrap();
    let out = dir.path().join("out");
    let status = reflex_bin()
        .args(["run", "--workers", "2", "--seed", "99", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let doc = out.join("result.json");
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&doc).unwrap()).unwrap();
    assert_eq!(value["config"]["seed"], 99);
    assert!(fs::read_to_string(out.join("results.csv")).unwrap().starts_with("epsilon,n_paths,hits"));

    let ok = reflex_bin().args(["replay", "--workers", "1"]).arg(&doc).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));

    let tampered = fs::read_to_string(&doc).unwrap().replacen("\"hits\": ", "\"hits\": 1", 1);
    fs::write(&doc, tampered).unwrap();
    let bad = reflex_bin().arg("replay").arg(&doc).output().unwrap();
    assert_eq!(bad.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["error"], "divergence");
    assert!(report["divergences"][0].as_str().unwrap().ends_with("/hits"));
}

#[test]
fn cli_schema_error_writes_error_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    fs::write(&cfg_path, SMALL_LDP.replace("shape = \"interval\"", "shape = \"donut\"")).unwrap();
    let out = dir.path().join("out");
    let res = reflex_bin().arg("run").arg("--config").arg(&cfg_path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["error"], "schema");
    assert_eq!(err["exit_code"], 2);

    let res = reflex_bin().arg("validate").arg("--config").arg(&cfg_path).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn cli_validate_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("x0.toml");
    fs::write(&cfg_path, SMALL_LDP.replace("x0 = [0.0]", "x0 = [-3.0]")).unwrap();
    let res = reflex_bin().arg("validate").arg("--config").arg(&cfg_path).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["ok"], false);
    assert_eq!(report["issues"][0]["pointer"], "/experiment/initial/x0");
}
