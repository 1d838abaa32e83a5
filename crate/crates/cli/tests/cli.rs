use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const GAUSSIAN_1D: &str = r#"
[init]
b0 = [1.0, 0.0]
a0 = [[1.0, 0.0]]
x0 = [0.0]
"#;

fn lognls(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lognls"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LOGNLS_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(dir: &Path, text: &str) -> (Output, Value) {
    let cfg = write_config(dir, "run.toml", text);
    let out = lognls(&["run", cfg.to_str().unwrap()], dir);
    let summary = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, summary)
}

fn check<'a>(summary: &'a Value, name: &str) -> &'a Value {
    summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name} in {summary}"))
}

fn compare_config(t_end: f64) -> String {
    format!(
        r#"kind = "compare"
[model]
lambda = 1.0
{GAUSSIAN_1D}
[grid]
dim = 1
n = 512
half_width = 30.0
[times]
t_end = {t_end}
dt = 1e-3
snapshots = 5
[output]
dir = "out"
formats = ["csv", "json", "svg"]
"#
    )
}

#[test]
fn asymptotics_run_reports_ratio_within_five_ell() {
    let tmp = TempDir::new().unwrap();
    let (out, s) = run(
        tmp.path(),
        r#"kind = "asymptotics"
[model]
lambda = 1.0
[times]
t_end = 1e6
snapshots = 40
spacing = "logarithmic"
t_first = 10.0
[output]
dir = "out"
"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["kind"], "asymptotics");
    assert_eq!(s["status"], "passed");
    assert_eq!(check(&s, "final_ratio_deviation")["pass"], true);
    let csv = fs::read_to_string(tmp.path().join("out/asymptotics.csv")).unwrap();
    assert!(csv.starts_with("t,tau,tau_dot,ratio,ell,s\n"));
    assert_eq!(csv.lines().count(), 41);
    assert!(tmp.path().join("out/tau.csv").exists());
    assert!(tmp.path().join("out/summary.json").exists());
}

#[test]
fn compare_run_reports_error_and_mass_drift() {
    let tmp = TempDir::new().unwrap();
    let (out, s) = run(tmp.path(), &compare_config(0.5));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(s["metrics"]["l2_error"].as_f64().unwrap() < 1e-4);
    assert!(s["metrics"]["mass_drift"].as_f64().unwrap() < 1e-10);
    for f in ["compare.csv", "l2_error.svg", "summary.json"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn gaussian_ode_slope_is_within_ten_percent() {
    let tmp = TempDir::new().unwrap();
    let (out, s) = run(
        tmp.path(),
        &format!(
            r#"kind = "gaussian_ode"
[model]
lambda = 1.0
{GAUSSIAN_1D}
[times]
t_end = 1e8
snapshots = 60
spacing = "logarithmic"
t_first = 1e-2
[output]
dir = "out"
formats = ["csv", "svg"]
"#
        ),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ratio = s["metrics"]["grad_norm_sq_slope_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    assert!(tmp.path().join("out/grad_norm_sq.svg").exists());
    assert!(tmp.path().join("out/gaussian_axis1.csv").exists());
    assert!(!tmp.path().join("out/summary.json").exists());
}

fn pde_config(frame: &str, snapshots: usize, extra: &str) -> String {
    format!(
        r#"kind = "pde"
[model]
lambda = 1.0
mu = 1.0
sigma = 1.0
{GAUSSIAN_1D}
[grid]
dim = 1
n = 256
half_width = 15.0
[times]
t_end = 10.0
dt = 1e-3
snapshots = {snapshots}
spacing = "logarithmic"
t_first = 0.1
frame = "{frame}"
[output]
dir = "out"
formats = ["csv", "json", "svg"]
field_snapshots = true
{extra}"#
    )
}

#[test]
fn comoving_pde_run_writes_diagnostics_and_snapshots() {
    let tmp = TempDir::new().unwrap();
    let (out, s) = run(tmp.path(), &pde_config("comoving", 6, ""));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(s["metrics"]["records"], 7.0);
    let diag = fs::read_to_string(tmp.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 8);
    let fields = tmp.path().join("out/fields");
    assert!(fields.join("profile_0000.bin").exists());
    assert!(fields.join("profile_0006.json").exists());
}

#[test]
fn stored_snapshot_restarts_a_run() {
    let tmp = TempDir::new().unwrap();
    let fixed = pde_config("fixed", 2, "").replace("t_end = 10.0", "t_end = 0.2").replace(
        "spacing = \"logarithmic\"\nt_first = 0.1\n",
        "",
    );
    let (out, _) = run(tmp.path(), &fixed);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let restart = fixed
        .replace(GAUSSIAN_1D, "[init]\nfield = \"out/fields/field_0002.json\"\n")
        .replace("dir = \"out\"", "dir = \"restart\"");
    let (out, s) = run(tmp.path(), &restart);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(s["status"], "passed");
}

#[test]
fn empty_schedule_gives_initial_diagnostics_only() {
    let tmp = TempDir::new().unwrap();
    for frame in ["fixed", "comoving"] {
        // the fixed box holds the spreading datum only briefly
        let cfg = pde_config(frame, 0, "").replace("t_end = 10.0", "t_end = 1.0");
        let (out, s) = run(tmp.path(), &cfg);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(s["metrics"]["records"], 1.0, "{frame}");
    }
}

#[test]
fn fp_run_checks_late_trends() {
    let tmp = TempDir::new().unwrap();
    let cfg = pde_config("comoving", 10, "")
        .replace("kind = \"pde\"", "kind = \"fp\"")
        .replace("t_end = 10.0", "t_end = 300.0")
        .replace("t_first = 0.1", "t_first = 0.01")
        .replace("field_snapshots = true", "");
    let (out, s) = run(tmp.path(), &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(check(&s, "entropy_max_increase")["pass"], true);
    assert_eq!(check(&s, "w2_max_increase")["pass"], true);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/fp_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn short_s_span_fails_before_evolving() {
    let tmp = TempDir::new().unwrap();
    let cfg = pde_config("comoving", 4, "")
        .replace("kind = \"pde\"", "kind = \"fp\"")
        .replace("t_first = 0.1", "t_first = 5.0");
    let (out, s) = run(tmp.path(), &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(s["error"]["module"], "fokker_planck");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn validation_errors_exit_2_with_positions() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "kind = \"pde\"\n[model]\nlambda = 1.0\n[times]\nt_end = -1.0\n[output]\ndir = \"out\"\n",
    );
    let out = lognls(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("times.t_end must be positive"), "{err}");
    assert!(err.contains("needs a [grid] section"), "{err}");

    let cfg = write_config(tmp.path(), "syntax.toml", "kind = \"pde\"\n[model\nlambda = 1\n");
    let out = lognls(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with(&format!("{}:2:", cfg.display())), "{err}");

    let cfg = write_config(tmp.path(), "kind.toml", "kind = \"heat\"\n");
    let out = lognls(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heat"));
}

#[test]
fn validate_prints_the_normalized_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &compare_config(1.0));
    let out = lognls(&["validate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = lognls_cli::parse_config(&text).unwrap();
    assert_eq!(parsed.config.tolerances.l2_error, 1e-4);
}

#[test]
fn mass_leak_exits_3_and_leaves_no_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = compare_config(20.0).replace("half_width = 30.0", "half_width = 6.0");
    let (out, s) = run(tmp.path(), &cfg);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["module"], "pde_solver");
    assert!(!tmp.path().join("out/compare.csv").exists());
}

#[test]
fn failed_checks_exit_3_but_keep_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{}[tolerances]\nl2_error = 1e-12\n", compare_config(0.5));
    let (out, s) = run(tmp.path(), &cfg);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(s["status"], "failed");
    assert_eq!(check(&s, "l2_error")["pass"], false);
    assert!(tmp.path().join("out/compare.csv").exists());
}

#[test]
fn a_failed_write_removes_the_partial_output_set() {
    let tmp = TempDir::new().unwrap();
    // a directory where the summary should go makes the last write fail
    fs::create_dir_all(tmp.path().join("out/summary.json/blocker")).unwrap();
    let (out, _) = run(tmp.path(), &compare_config(0.5));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("out/compare.csv").exists());
    assert!(!tmp.path().join("out/l2_error.svg").exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("summary.json")]);
}

#[test]
fn output_root_variable_relocates_relative_dirs() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("root");
    let cfg = write_config(tmp.path(), "c.toml", &compare_config(0.2));
    let out = Command::new(env!("CARGO_BIN_EXE_lognls"))
        .args(["run", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("LOGNLS_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(root.join("out/compare.csv").exists());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn plot_command_is_deterministic_and_reports_slopes() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("data.csv");
    fs::write(&csv, "t,a,b\n1,1,3\n10,100,30\n100,10000,300\n").unwrap();
    let spec = write_config(
        tmp.path(),
        "spec.toml",
        "x = \"t\"\ny = [\"a\", \"b\"]\nlog_x = true\nlog_y = true\ntitle = \"powers\"\n",
    );
    let mut svgs = Vec::new();
    for name in ["one.svg", "two.svg"] {
        let out = lognls(
            &["plot", csv.to_str().unwrap(), spec.to_str().unwrap(), "-o", name],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!((v["slopes"]["a"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert!((v["slopes"]["b"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        svgs.push(fs::read(tmp.path().join(name)).unwrap());
    }
    assert_eq!(svgs[0], svgs[1]);

    let bad = write_config(tmp.path(), "bad.toml", "x = \"t\"\ny = [\"c\"]\n");
    let out = lognls(&["plot", csv.to_str().unwrap(), bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("available"));
}
