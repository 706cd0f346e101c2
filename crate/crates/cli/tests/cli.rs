use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name).to_string_lossy().into_owned()
}

fn mapmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapmom")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_bad_row() {
    let o = mapmom(&["validate", &model("broken_row.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Q[0]"));
    let o = mapmom(&["validate", &model("model_b.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pi = [5.0000000000000000e-1, 5.0000000000000000e-1]"));
}

#[test]
fn missing_file_and_bad_arguments() {
    assert_eq!(mapmom(&["validate", "no/such/model.json"]).status.code(), Some(2));
    assert_eq!(mapmom(&["nosuch"]).status.code(), Some(2));
    assert_eq!(mapmom(&["map-moments", &model("model_a.json"), "--state", "3"]).status.code(), Some(2));
}

#[test]
fn stationary_ou_json() {
    let o = mapmom(&["stationary", &model("ou.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["moments"][0].as_f64(), Some(0.0));
    assert!((v["moments"][1].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["check"]["exists"].as_bool(), Some(true));
}

#[test]
fn stationary_heavy_tail_fails() {
    let o = mapmom(&["stationary", &model("pareto.json")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(iv)=false"));
}

#[test]
fn map_moments_table() {
    let o = mapmom(&["map-moments", &model("model_a.json"), "--t", "0:1:3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,mean,variance,mean_hat_1,mean_hat_2");
    assert_eq!(rows.len(), 4);
    let mean: f64 = rows[3].split(',').nth(1).unwrap().parse().unwrap();
    // 1.5 t - (1 - e^{-2t}) / 4 from state 1
    assert!((mean - (1.5 - (1.0 - (-2.0f64).exp()) / 4.0)).abs() < 1e-12);
}

#[test]
fn simulate_is_reproducible_apart_from_timestamp() {
    let args = ["simulate", &model("model_b.json"), "--what", "mmgou", "--paths", "2000", "--t", "1"];
    let (a, b) = (stdout(&mapmom(&args)), stdout(&mapmom(&args)));
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# timestamp")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));
    assert!(a.contains("# seed: 20240601"));
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("mapmom-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("acf.csv");
    let o = mapmom(&["--output", path.to_str().unwrap(), "acf", &model("model_b.json"), "--stationary", "--lags", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}
