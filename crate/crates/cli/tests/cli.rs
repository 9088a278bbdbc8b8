use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn levytree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levytree")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let d = dir.to_str().unwrap();
    all.extend(["--out-dir", d]);
    levytree(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn schemas() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schemas().join(schema_file)).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

fn csv_formats() -> Value {
    serde_json::from_str(&std::fs::read_to_string(schemas().join("csv_formats.json")).unwrap()).unwrap()
}

fn header(dir: &Path, name: &str) -> Vec<String> {
    read(dir, name).lines().next().unwrap().split(',').map(String::from).collect()
}

/// Checks the manifest against its schema and against the files on disk.
fn check_manifest(dir: &Path) -> Value {
    let m = json(dir, "manifest.json");
    assert_valid("run_manifest.schema.json", &m);
    for f in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    m
}

#[test]
fn simulate_tree_emits_three_csvs_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["simulate-tree", "--psi", "brownian", "--horizon", "10", "--dt", "1e-4", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let formats = csv_formats();
    for (name, cols) in formats["simulate-tree"].as_object().unwrap() {
        let expected: Vec<String> = serde_json::from_value(cols.clone()).unwrap();
        assert_eq!(header(t.path(), name), expected);
        assert_eq!(read(t.path(), name).lines().count(), 100_002);
    }
    let m = check_manifest(t.path());
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["X.csv", "I.csv", "H.csv"]);
    assert_eq!(m["parameters"]["seed"], 7);
    let h: Vec<f64> = read(t.path(), "H.csv").lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(h.iter().all(|&v| v >= 0.0));
}

#[test]
fn simulate_tree_is_byte_stable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run_in(d.path(), &["simulate-tree", "--psi", "stable:1.5", "--horizon", "1", "--dt", "1e-3", "--seed", "7"]);
        assert_eq!(code(&o), 0);
    }
    for name in ["X.csv", "I.csv", "H.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let c = tempfile::tempdir().unwrap();
    run_in(c.path(), &["simulate-tree", "--psi", "stable:1.5", "--horizon", "1", "--dt", "1e-3", "--seed", "8"]);
    assert_ne!(read(a.path(), "X.csv"), read(c.path(), "X.csv"));
}

#[test]
fn psi_flag_validation() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(t.path(), &["simulate-tree", "--psi", "stable:1.5", "--horizon", "0.1", "--dt", "1e-3"])), 0);
    let bad = run_in(t.path(), &["simulate-tree", "--psi", "stable:2.5"]);
    assert_eq!(code(&bad), 64);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("(1,2)"));
    assert_eq!(code(&run_in(t.path(), &["simulate-tree", "--psi", "cauchy"])), 64);
    assert_eq!(code(&run_in(t.path(), &["simulate-tree", "--dt", "-1"])), 64);
    assert_eq!(code(&run_in(t.path(), &["simulate-tree", "--window", "3"])), 64);
    assert_eq!(code(&run_in(t.path(), &["run-snake", "--psi", "stable:1.5"])), 64);
}

#[test]
fn run_snake_zero_horizon_gives_header_only_csvs() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["run-snake", "--horizon", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let formats = csv_formats();
    for (name, cols) in formats["run-snake"].as_object().unwrap() {
        let expected: Vec<String> = serde_json::from_value(cols.clone()).unwrap();
        assert_eq!(read(t.path(), name), format!("{}\n", expected.join(",")));
    }
    assert_valid("snake_diagnostics.schema.json", &json(t.path(), "diagnostics.json"));
    check_manifest(t.path());
}

#[test]
fn run_snake_columns_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["run-snake", "--horizon", "1", "--dt", "1e-4", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(t.path(), "tips.csv"), ["t", "H", "W_hat", "Lambda_hat"]);
    assert_eq!(header(t.path(), "A.csv"), ["t", "A"]);
    assert_eq!(header(t.path(), "H_A.csv"), ["t", "H_A"]);
    assert_eq!(read(t.path(), "tips.csv").lines().count(), 10_002);
    let d = json(t.path(), "diagnostics.json");
    assert_valid("snake_diagnostics.schema.json", &d);
    let m = check_manifest(t.path());
    let mut listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    listed.sort();
    assert_eq!(listed, ["A.csv", "H_A.csv", "diagnostics.json", "tips.csv"]);
    // A is nondecreasing
    let a: Vec<f64> = read(t.path(), "A.csv").lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(a.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*a.last().unwrap(), d["a_total"].as_f64().unwrap());
}

#[test]
fn config_file_with_flags_winning() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.json");
    let cfg_json = serde_json::json!({ "psi": "brownian", "horizon": 0.5, "dt": 1e-3, "seed": 5, "levels": [0.1] });
    assert_valid("config.schema.json", &cfg_json);
    std::fs::write(&cfg, cfg_json.to_string()).unwrap();
    let out = t.path().join("a");
    let o = run_in(&out, &["simulate-tree", "--config", cfg.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out, "manifest.json");
    assert_eq!(m["parameters"]["seed"], 6);
    assert_eq!(m["parameters"]["dt"], 1e-3);
    assert_eq!(m["parameters"]["horizon"], 0.5);

    let toml = t.path().join("cfg.toml");
    std::fs::write(&toml, "psi = \"stable:1.5\"\nhorizon = 0.5\ndt = 0.001\nseed = 5\n").unwrap();
    let out = t.path().join("b");
    assert_eq!(code(&run_in(&out, &["simulate-tree", "--config", toml.to_str().unwrap()])), 0);
    assert_eq!(json(&out, "manifest.json")["parameters"]["psi"]["kind"], "stable");

    std::fs::write(&cfg, r#"{"sede": 5}"#).unwrap();
    assert_eq!(code(&run_in(t.path(), &["simulate-tree", "--config", cfg.to_str().unwrap()])), 64);
}

#[test]
fn verify_unknown_check_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["verify", "no-such-check"]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("psi-tilde-fit"));
    assert_eq!(code(&run_in(t.path(), &["verify", "support", "--horizon", "2"])), 64);
    assert_eq!(code(&levytree(&["verify"])), 64);
}

#[test]
fn verify_support_writes_report() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["verify", "support", "--dt", "1e-4", "--seed", "1", "--replicas", "5"]);
    let c = code(&o);
    assert!([0, 2, 3].contains(&c), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(t.path(), "support.report.json");
    assert_valid("check_report.schema.json", &r);
    let expected = match r["status"].as_str().unwrap() {
        "pass" => 0,
        "fail" => 2,
        _ => 3,
    };
    assert_eq!(c, expected);
    assert_eq!(r["parameters"]["base"]["seed"], 1);
    assert_eq!(r["parameters"]["base"]["dt"], 1e-4);
    check_manifest(t.path());
}

#[test]
fn failing_check_exits_2_with_effect_size() {
    // at dt = 1e-2 the lattice symmetric difference is far above 5% of sigma
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["verify", "support", "--dt", "1e-2", "--seed", "1", "--replicas", "10"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(t.path(), "support.report.json");
    assert_valid("check_report.schema.json", &r);
    assert_eq!(r["status"], "fail");
    let failed: Vec<&Value> = r["criteria"].as_array().unwrap().iter().filter(|c| c["status"] == "fail").collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| c["effect_size"].as_f64().unwrap() != 0.0));
}

#[test]
fn verify_all_runs_every_check() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["verify", "all", "--dt", "1e-3", "--replicas", "2", "--window", "2", "--lambda-grid", "0.5,1,2"]);
    let c = code(&o);
    assert!([0, 2, 3].contains(&c), "{}", String::from_utf8_lossy(&o.stderr));
    let formats = csv_formats();
    let mut statuses = Vec::new();
    for (raw, cols) in formats["verify"].as_object().unwrap() {
        let name = raw.trim_end_matches(".raw.csv");
        let r = json(t.path(), &format!("{name}.report.json"));
        assert_valid("check_report.schema.json", &r);
        assert_eq!(r["name"], name);
        statuses.push(r["status"].as_str().unwrap().to_string());
        if cols.is_null() {
            assert!(!t.path().join(raw).exists());
        } else {
            let expected: Vec<String> = serde_json::from_value(cols.clone()).unwrap();
            assert_eq!(header(t.path(), raw), expected);
        }
    }
    assert_eq!(statuses.len(), 11);
    let expected = if statuses.iter().any(|s| s == "fail") {
        2
    } else if statuses.iter().any(|s| s == "inconclusive") {
        3
    } else {
        0
    };
    assert_eq!(c, expected);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let order: Vec<&str> = stdout.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split(':').next().unwrap()).collect();
    assert_eq!(order.first(), Some(&"tree-algebra"));
    assert_eq!(order.last(), Some(&"identities"));
    assert_eq!(check_manifest(t.path())["command"], "verify all");
}

#[test]
fn results_do_not_depend_on_workers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["verify", "many-to-one", "--dt", "1e-3", "--replicas", "3", "--window", "2", "--seed", "4"];
    let mut one = args.to_vec();
    one.extend(["--workers", "1"]);
    let mut two = args.to_vec();
    two.extend(["--workers", "2"]);
    run_in(a.path(), &one);
    run_in(b.path(), &two);
    assert_eq!(read(a.path(), "many-to-one.raw.csv"), read(b.path(), "many-to-one.raw.csv"));
    assert_eq!(json(a.path(), "many-to-one.report.json")["details"], json(b.path(), "many-to-one.report.json")["details"]);
}
