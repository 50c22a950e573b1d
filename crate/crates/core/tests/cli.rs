mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rrimpute::data::load_table;

fn rrimpute(args: &[&str]) -> Output {
    Command::new(common::bin()).args(args).output().expect("spawn binary")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_table(dir: &Path) -> std::path::PathBuf {
    let file = dir.join("small.csv");
    fs::write(
        &file,
        "id,a,b,c\nr1,1.0,2.0,3.5\nr2,NA,2.5,3.0\nr3,2.0,NA,4.0\nr4,3.0,3.5,NA\nr5,2.5,3.0,4.5\nr6,1.5,2.0,3.0\n",
    )
    .unwrap();
    file
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = rrimpute(&["impute", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn unknown_regressor_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_table(dir.path());
    let out = rrimpute(&[
        "impute",
        "--input",
        path(&input),
        "--output",
        path(&dir.path().join("o.csv")),
        "--regressor",
        "svm",
        "--id-column",
        "id",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn unreadable_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rrimpute(&[
        "impute",
        "--input",
        path(&dir.path().join("absent.csv")),
        "--output",
        path(&dir.path().join("o.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn impute_preserves_observations_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_table(dir.path());
    let output = dir.path().join("imputed.csv");
    let out = rrimpute(&[
        "impute",
        "--input",
        path(&input),
        "--output",
        path(&output),
        "--regressor",
        "knn",
        "--param",
        "k=2",
        "--id-column",
        "id",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let format = common::id_format();
    let before = load_table(&input, &format).unwrap();
    let after = load_table(&output, &format).unwrap();
    assert_eq!(after.ids, before.ids);
    assert_eq!(after.data.missing_count(), 0);
    for i in 0..before.data.n() {
        for j in 0..before.data.p() {
            if let Some(v) = before.data.get(i, j) {
                assert_eq!(after.data.get(i, j), Some(v));
            }
        }
    }

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("imputed.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "impute");
    assert_eq!(manifest["config"]["regressor"]["params"]["k"], 2);
    let digest = rrimpute::artifact::sha256_hex(&fs::read(&output).unwrap());
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a["sha256"] == digest.as_str()));
    assert!(manifest["timings"]["elapsed_ms"].is_number());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_table(dir.path());
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "seed = 5\ninput = {:?}\noutput = {:?}\n[table]\nid_column = \"id\"\n[regressor]\nstrategy = \"extra_trees\"\n[roundrobin]\nmax_rounds = 3\n",
            path(&input),
            path(&dir.path().join("from_file.csv")),
        ),
    )
    .unwrap();
    let output = dir.path().join("from_flag.csv");
    let out = rrimpute(&["impute", "--config", path(&config), "--seed", "9", "--output", path(&output)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(output.exists());
    assert!(!dir.path().join("from_file.csv").exists());

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("from_flag.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 9);
    assert_eq!(manifest["config"]["regressor"]["seed"], 9);
    assert_eq!(manifest["config"]["roundrobin"]["max_rounds"], 3);
}

#[test]
fn exhaustive_order_refuses_large_families() {
    let subsets = common::fixtures().join("cohort/subsets.json");
    let out = rrimpute(&["order", "--subsets", path(&subsets), "--mode", "exhaustive"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "capacity");
}

#[test]
fn greedy_order_prints_the_plan() {
    let subsets = common::fixtures().join("cohort/subsets.json");
    let out = rrimpute(&["order", "--subsets", path(&subsets)]);
    assert!(out.status.success());
    let plan: rrimpute::orderer::ImputationPlan = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan.steps.len(), 15);
    assert_eq!(plan.steps[0].target, 1);
}

#[test]
fn impute_plan_fills_each_block_for_its_participants() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("id,a1,a2,b1,b2\n");
    for i in 0..12 {
        let x = i as f64;
        let a1 = if i % 5 == 1 { "NA".to_string() } else { format!("{}", 1.0 + x) };
        let a2 = format!("{}", 2.0 + 0.5 * x);
        let (b1, b2) = if i < 6 {
            (if i == 2 { "NA".to_string() } else { format!("{}", 3.0 + x) }, format!("{}", 10.0 - x))
        } else {
            ("NA".to_string(), "NA".to_string())
        };
        csv.push_str(&format!("q{i},{a1},{a2},{b1},{b2}\n"));
    }
    let input = dir.path().join("wide.csv");
    fs::write(&input, csv).unwrap();
    let subsets = serde_json::json!({ "subsets": [
        { "id": 1, "participants": (0..12).map(|i| format!("q{i}")).collect::<Vec<_>>(), "variables": ["a1", "a2"] },
        { "id": 2, "participants": (0..6).map(|i| format!("q{i}")).collect::<Vec<_>>(), "variables": ["b1", "b2"] },
    ]});
    let subsets_path = dir.path().join("subsets.json");
    fs::write(&subsets_path, subsets.to_string()).unwrap();
    let output = dir.path().join("filled.csv");
    let out = rrimpute(&[
        "impute-plan",
        "--input",
        path(&input),
        "--subsets",
        path(&subsets_path),
        "--output",
        path(&output),
        "--regressor",
        "br",
        "--id-column",
        "id",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let filled = load_table(&output, &common::id_format()).unwrap();
    for i in 0..12 {
        assert!(filled.data.get(i, 0).is_some() && filled.data.get(i, 1).is_some());
        // Participants outside the second subset stay unobserved there.
        assert_eq!(filled.data.get(i, 2).is_some(), i < 6);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("filled.csv.manifest.json")).unwrap()).unwrap();
    let steps = manifest["result"]["plan"]["steps"].as_array().unwrap();
    assert_eq!(steps[0]["target"], 1);
    assert_eq!(steps[1]["conditioning"], serde_json::json!([1]));
}

#[test]
fn evaluate_writes_report_and_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_table(dir.path());
    let report = dir.path().join("report.json");
    let out = rrimpute(&[
        "evaluate",
        "--input",
        path(&input),
        "--out",
        path(&report),
        "--regressors",
        "br,knn",
        "--full-loo",
        "--id-column",
        "id",
        "--max-rounds",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let names: Vec<&str> =
        value["models"].as_array().unwrap().iter().map(|m| m["model"].as_str().unwrap()).collect();
    assert!(names.contains(&"mean") && names.contains(&"br") && names.contains(&"knn"));
    let long = fs::read_to_string(dir.path().join("report.plane.csv")).unwrap();
    assert!(long.lines().count() > 1);
}

#[test]
fn grid_sweep_adds_labelled_models() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_table(dir.path());
    let report = dir.path().join("grid.json");
    let out = rrimpute(&[
        "evaluate",
        "--input",
        path(&input),
        "--out",
        path(&report),
        "--regressors",
        "knn",
        "--grid",
        "knn:k=1,2",
        "--id-column",
        "id",
        "--max-rounds",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let names: Vec<&str> =
        value["models"].as_array().unwrap().iter().map(|m| m["model"].as_str().unwrap()).collect();
    assert_eq!(names, ["mean", "knn", "knn[k=1]", "knn[k=2]"]);
}
