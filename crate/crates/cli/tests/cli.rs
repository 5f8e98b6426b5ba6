use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hyptimes");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn hyptimes(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).env("HYPTIMES_OUTPUT_DIR", out).output().unwrap()
}

const DOUBLING_FIRSTTIME: &str = r#"
map = "doubling"
seed = 3
horizon = 10
experiments = ["firsttime"]
[params]
sigma = 0.5
delta = 0.1
b = 0.25
beta = 0.5
[ensemble]
kind = "grid"
size = 64
"#;

#[test]
fn doubling_first_time_is_one_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DOUBLING_FIRSTTIME);
    let out = tmp.path().join("out");
    let o = hyptimes(&["run", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hist = fs::read_to_string(out.join("firsttime_histogram.csv")).unwrap();
    assert_eq!(hist, "k,count,mass\n1,64,1.0000000000000000e0\n");
}

#[test]
fn rejects_b_above_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &DOUBLING_FIRSTTIME.replace("b = 0.25", "b = 0.6"));
    for cmd in ["validate", "run"] {
        let o = hyptimes(&[cmd, cfg.to_str().unwrap()], tmp.path());
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("b < 1/2"), "{err}");
    }
}

#[test]
fn validate_and_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DOUBLING_FIRSTTIME);
    let o = hyptimes(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    let o = hyptimes(&["list-experiments"], tmp.path());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["detect", "firsttime", "ulam", "verify", "report"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{text}");
    }
    let default = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert!(hyptimes(&["validate", default.to_str().unwrap()], tmp.path()).status.success());
}

#[test]
fn unknown_experiment_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &DOUBLING_FIRSTTIME.replace("[\"firsttime\"]", "[\"plot\"]"));
    let o = hyptimes(&["run", cfg.to_str().unwrap()], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown experiment \"plot\""));
}

#[test]
fn unwritable_output_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DOUBLING_FIRSTTIME);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = hyptimes(&["run", cfg.to_str().unwrap()], &blocker.join("out"));
    assert!(!o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

const SMALL_INTERMITTENT: &str = r#"
map = "intermittent"
seed = 11
horizon = 2000
experiments = ["detect", "firsttime", "ulam", "verify", "report"]
[params]
sigma = 0.9048374180359595
delta = 0.001
b = 0.24
beta = 0.5
[ensemble]
kind = "random"
size = 50
[ulam]
k = 128
[detect]
horizons = [100, 1000]
trace_length = 200
[verify]
lyapunov_points = 20
lyapunov_horizon = 500
lemma51_n = 1000
transfer_points = 100
local_orbits = 3
local_length = 100
local_pairs = 3
recurrence_points = 20
recurrence_horizon = 500
recurrence_levels = 3
[report]
oracle_cases = 1200
oracle_random_traces = 20
oracle_random_length = 50
transfer_points = 100
ulam_k = 128
lyapunov_points = 20
lyapunov_horizon = 500
lemma51_n = 1000
firsttime_points = 200
firsttime_horizon = 1000
frequency_points = 50
frequency_horizon = 1000
local_times = [10]
local_orbits = 5
local_pairs = 3
density_times = [10, 20]
density_points = 2000
density_k = 16
density_spread = 1.0
"#;

#[test]
fn full_run_is_reproducible_and_exit_code_counts_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_INTERMITTENT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = hyptimes(&["run", cfg.to_str().unwrap()], &a);
    let ob = hyptimes(&["run", cfg.to_str().unwrap()], &b);
    assert_eq!(oa.status.code(), ob.status.code());

    let names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 15, "{names:?}");
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }

    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    let verify: serde_json::Value = serde_json::from_slice(&fs::read(a.join("verify_summary.json")).unwrap()).unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 11);
    for c in criteria {
        for cond in c["conditions"].as_array().unwrap() {
            assert!(cond.get("measured").is_some() && cond.get("threshold").is_some() && cond.get("passed").is_some());
        }
    }
    // a spread threshold of 1 cannot be met by distinct sup densities
    let density = criteria.iter().find(|c| c["id"] == 10).unwrap();
    assert_eq!(density["passed"], false);
    let failed = |v: &serde_json::Value, key: &str| {
        v[key].as_array().unwrap().iter().filter(|c| c["passed"] == false).count() as i32
    };
    let expected = failed(&report, "criteria") + failed(&verify, "checks");
    assert_eq!(oa.status.code(), Some(expected));

    let lyap = verify["lyapunov"]["quadrature"].as_f64().unwrap();
    assert!((lyap + 0.5).abs() <= 1e-6, "{lyap}");
}
