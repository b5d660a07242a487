use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "specs", name].iter().collect();
    p.display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cantor-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn cantor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantor")).args(args).output().unwrap()
}

fn report(args: &[&str]) -> Value {
    let out = cantor(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| cantor(args).status.code().unwrap();
    assert_eq!(code(&["--op", "set", "--spec", &spec("overlapping.json")]), 5);
    assert_eq!(code(&["--op", "measure", "--spec", &spec("degenerate.json"), "--p", "1"]), 3);
    assert_eq!(code(&["--op", "set", "--spec", "/nonexistent/spec.json"]), 1);
    assert_eq!(code(&["--op", "embed", "--points", "1/2", "--p", "1"]), 2);
    assert_eq!(code(&["--op", "measure", "--spec", &spec("middle_thirds.json"), "--p", "1/0"]), 2);

    let bad = scratch("bad.json");
    std::fs::write(&bad, r#"{"kind":"explicit","levels":[[{"interval":["0","1/0"],"gap":null}]]}"#).unwrap();
    assert_eq!(code(&["--op", "set", "--spec", bad.to_str().unwrap()]), 2);
}

#[test]
fn set_report_on_thirds() {
    let r = report(&["--op", "set", "--spec", &spec("middle_thirds.json"), "--depth", "8"]);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["is_nice"], true);
    assert_eq!(r["result"]["declared"]["regular"], serde_json::json!(["1/1", "1/1"]));
    assert_eq!(r["result"]["declared"]["porous"]["holds"], true);
}

#[test]
fn measure_cdf_is_monotone() {
    let r = report(&["--op", "measure", "--spec", &spec("middle_thirds.json"), "--p", "1", "--depth", "4"]);
    let cdf = r["result"]["cdf"].as_array().unwrap();
    assert_eq!(cdf.len(), 101);
    let lower = |v: &Value| v["mass"]["lower"].as_str().unwrap().parse::<f64>().unwrap();
    assert!(cdf.windows(2).all(|w| lower(&w[0]) <= lower(&w[1])));
    assert_eq!(lower(&cdf[0]), 0.0);
    assert!((lower(&cdf[100]) - 1.0).abs() < 1e-12);
}

#[test]
fn csv_tables_and_config_file() {
    let cfg = scratch("run.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "op": "measure",
            "spec": spec("middle_thirds.json"),
            "p": "1/2",
            "depth": 3,
            "scales": "2..4",
            "samples": 20,
            "seed": 11,
            "format": "csv"
        })
        .to_string(),
    )
    .unwrap();
    let out = scratch("measure.csv");
    let run = cantor(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let main = std::fs::read_to_string(&out).unwrap();
    assert!(main.starts_with("t,lower,upper\n"));
    let doubling = std::fs::read_to_string(format!("{}.doubling.csv", out.display())).unwrap();
    assert!(doubling.starts_with("scale,samples,max_ratio_lower,max_ratio_upper\n"));
    assert_eq!(doubling.lines().count(), 4);

    let unknown = scratch("unknown.json");
    std::fs::write(&unknown, r#"{"op":"set","colour":"blue"}"#).unwrap();
    assert_eq!(cantor(&["--config", unknown.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn classify_tags() {
    let r = report(&["--op", "classify", "--spec", &spec("harmonic.json"), "--samples", "1024"]);
    let growth: Vec<(String, String)> = r["result"]["sums"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["p"].as_str().unwrap().to_string(), s["growth"].as_str().unwrap().to_string()))
        .collect();
    assert!(growth.contains(&("1/2".into(), "linear-growth".into())));
    assert!(growth.contains(&("2/1".into(), "bounded-looking".into())));

    let r = report(&["--op", "classify", "--spec", &spec("quartering.json"), "--samples", "256"]);
    assert!(r["result"]["sums"].as_array().unwrap().iter().all(|s| s["growth"] == "bounded-looking"));
}

#[test]
fn embed_then_check() {
    let out = scratch("embed.json");
    let run = cantor(&["--op", "embed", "--points", "1/2", "--p", "1/2", "--blocks", "2", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let sums: Vec<&str> = r["result"]["certificate"]["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["sum"]["lower"].as_str().unwrap())
        .collect();
    assert_eq!(sums.len(), 2);
    assert!(sums.iter().all(|s| s.parse::<f64>().unwrap() >= 1.0));

    let spec_file = scratch("embedded_spec.json");
    std::fs::write(&spec_file, r["result"]["construction"].to_string()).unwrap();
    let set = report(&["--op", "set", "--spec", spec_file.to_str().unwrap(), "--depth", "8"]);
    assert_eq!(set["result"]["declared"]["porous"]["holds"], true);
}

#[test]
fn midpoint_bundle() {
    let r = report(&[
        "--op", "midpoint", "--spec", &spec("fat_halving.json"), "--depth", "5", "--scales", "2..4", "--samples", "20",
    ]);
    let res = &r["result"];
    assert_eq!(res["atoms"], 31);
    assert_eq!(res["roundtrip_exact"], 31);
    assert_eq!(res["cover"]["verdict"]["p1"], "pass");
    assert_eq!(res["cover"]["verdict"]["p2"], "pass");
}
