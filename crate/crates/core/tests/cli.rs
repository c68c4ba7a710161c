use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_passage-lab"));
    cmd.env_remove("PASSAGE_LAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn estimate_args<'a>(dir: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "estimate", "--kernel", "bm", "--c", "1.5", "--horizons", "1,2,3", "--paths", "3000", "--delta", "0.05",
        "--out-dir", dir,
    ];
    v.extend_from_slice(extra);
    v
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn z_and_zinv_report_values() {
    let out = run(&["z", "--mu", "1"]);
    assert!(out.status.success());
    assert!((json_of(&out)["value"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let out = run(&["zinv", "--c", "1"]);
    assert!((json_of(&out)["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn exit_codes_follow_error_class() {
    // Domain error.
    assert_eq!(run(&["zinv", "--c", "100"]).status.code(), Some(1));
    // Unparseable arguments.
    assert_eq!(run(&["z"]).status.code(), Some(1));
    // A non-positive integer b is a bad input; a divergent integral is numerical.
    assert_eq!(run(&["kummer", "--a", "1", "--b", "-2", "--z", "1"]).status.code(), Some(1));
    assert_eq!(run(&["k0", "--d", "1", "--gamma", "2", "--beta", "2"]).status.code(), Some(3));
    // Boundary exponent outside the critical regime.
    assert_eq!(run(&["estimate", "--kernel", "bm", "--c", "1", "--beta", "0.7"]).status.code(), Some(1));
}

#[test]
fn spde_queries() {
    let out = run(&["spde", "--d", "1", "--gamma", "2", "--beta", "1", "--nu", "1", "--query", "alpha,well-posed,k0"]);
    assert!(out.status.success());
    let v = json_of(&out);
    assert_eq!(v["alpha"].as_f64(), Some(0.25));
    assert_eq!(v["well_posed"]["value"].as_bool(), Some(true));
    assert!((v["k0"]["value"].as_f64().unwrap() - 0.751_125_544_464_942_5).abs() < 1e-8);

    let out = run(&["spde", "--d", "1", "--gamma", "0.9", "--beta", "1", "--nu", "1", "--query", "well-posed"]);
    let v = json_of(&out);
    assert_eq!(v["well_posed"]["value"].as_bool(), Some(false));
    assert_eq!(v["well_posed"]["threshold"].as_f64(), Some(1.0));
}

#[test]
fn schedule_reports_validity() {
    let out = run(&["schedule", "--family", "geometric", "--alpha", "0.5", "--n-max", "5"]);
    let v = json_of(&out);
    assert_eq!(v["schedule"]["validity"], "unknown");
    assert!(v["note"].as_str().unwrap().contains("open problem"));
    let out = run(&["schedule", "--family", "arithmetic", "--alpha", "0.5", "--n-max", "50", "--m", "10"]);
    let v = json_of(&out);
    assert_eq!(v["schedule"]["validity"], "proved-equivalent");
    assert!(v["budget"]["correction"].as_f64().unwrap() > 0.0);
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = first.path().to_str().unwrap();
    let out = run(&estimate_args(a, &["--seed", "11"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = first.path().join("manifest.json");
    let out = bin()
        .args(["--workers", "2", "estimate", "--manifest"])
        .arg(&manifest)
        .arg("--out-dir")
        .arg(second.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["survival.csv", "exponent.json", "bounds.json"] {
        assert_eq!(read(first.path(), name), read(second.path(), name), "{name}");
    }
    let csv = String::from_utf8(read(first.path(), "survival.csv")).unwrap();
    assert!(csv.starts_with("# manifest_hash="));
}

#[test]
fn seed_env_overrides_flag() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let paths: Vec<&str> = dirs.iter().map(|d| d.path().to_str().unwrap()).collect();
    assert!(run(&estimate_args(paths[0], &["--seed", "5"])).status.success());
    let out = bin()
        .args(estimate_args(paths[1], &["--seed", "99"]))
        .env("PASSAGE_LAB_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(run(&estimate_args(paths[2], &["--seed", "6"])).status.success());
    let csv = |i: usize| read(dirs[i].path(), "survival.csv");
    assert_eq!(csv(0), csv(1));
    assert_ne!(csv(0), csv(2));
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "kernel = bm\nc = 1\npaths = many\n").unwrap();
    let out = bin().args(["estimate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn library_entry_point_matches_binary() {
    assert_eq!(passage_lab::cli::run(["passage-lab", "z", "--mu", "2"]), 0);
    assert_eq!(passage_lab::cli::run(["passage-lab", "zinv", "--c=-1"]), 1);
}
