use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morrey-lab"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path) -> Output {
    exe().arg("--config").arg(config).args(args).output().unwrap()
}

const CONDITION: &str = r#"
[domain]
n = 1
L = 4.0
N = 64

[exponents]
p = [2.0, 2.0]
alpha = [0.25, 0.25]

[phi]
phi1 = ["power(beta=-0.5)", "power(beta=-0.5)"]
phi2 = "power(beta=-0.5)"

[plan]
r_min = 0.125
r_max = 1.0
per_octave = 2
t_max = 2.0
eta_max = 4.0

[probe]
kind = "condition"
"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn selftest_exits_zero() {
    let out = exe().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn missing_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = CONDITION.replace("p = [2.0, 2.0]\n", "");
    let cfg = write(dir.path(), "bad.toml", &body);
    let out = run(&["condition"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exponents.p"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = CONDITION.replace("per_octave = 2", "per_octave = 2\nper_octav = 3");
    let cfg = write(dir.path(), "typo.toml", &body);
    let out = run(&["condition"], &cfg);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_integrable_weight_is_a_numeric_abort() {
    let dir = tempfile::tempdir().unwrap();
    let body = CONDITION.replace(
        "[phi]",
        "[weights]\nw = [\"power(center=0, a=-1)\", \"const(1)\"]\n\n[phi]",
    );
    let cfg = write(dir.path(), "singular.toml", &body);
    let out = run(&["condition"], &cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn condition_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONDITION);
    let out = run(&["condition"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("x,r,t_star,eta_star,value"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn out_file_gets_a_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let status = exe()
        .arg("--config")
        .arg(configs().join("weights.toml"))
        .arg("--out")
        .arg(&out)
        .arg("weights")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("quantity,component,value,x,r\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["probe"], "weights");
}

#[test]
fn same_seed_and_threads_give_identical_csv() {
    let cfg = configs().join("sharpness.toml");
    let a = run(&["--threads", "3", "--seed", "5", "probe"], &cfg);
    let b = run(&["--threads", "3", "--seed", "5", "probe"], &cfg);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_format_is_parseable() {
    let out = run(&["--format", "json", "eval"], &configs().join("eval_indicator.toml"));
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["probe"], "eval");
}

#[test]
fn bad_flag_exits_one() {
    let out = exe().arg("--no-such-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
