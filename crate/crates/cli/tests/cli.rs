use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MINIMAL: &str = r#"
seed = 3
constellation = 4
snr_db = [-20.0, -10.0, 0.0]
methods = ["none"]

[geometry]
kind = "ula"
elements = 32
spacing = 0.5

[[groups]]
id = 1
theta_deg = 60.0
theta_spread_deg = 4.0
paths = 5
users = [2]
"#;

fn vcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn bundled_scenarios_validate() {
    for name in [
        "ula_5_group.toml",
        "upa_8_group.toml",
        "upa_ofdm_3_group.toml",
    ] {
        let o = vcm(&["validate", &scenario(name)]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}

#[test]
fn minimal_run_writes_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = vcm(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "group,user,method,snr_s_db,snr_b_db,mi_bits,iters,rho,support_size"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,,none,-20.0,"));
    assert!(out.join("report.json").exists());
    assert!(out.join("group1.svg").exists());
}

#[test]
fn no_plots_flag_skips_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("out");
    let o = vcm(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--no-plots",
    ]);
    assert!(o.status.success());
    assert!(!out.join("group1.svg").exists());
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let mut csvs = Vec::new();
    for (i, threads) in ["1", "2", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = vcm(&[
            "run",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        csvs.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        vcm(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    assert!(vcm(&[
        "run",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    assert_ne!(
        std::fs::read(a.join("results.csv")).unwrap(),
        std::fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn missing_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &MINIMAL.replace("seed = 3\n", ""));
    let o = vcm(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &MINIMAL.replace("paths = 5", "paths = = 5"),
    );
    let o = vcm(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 16"), "{}", stderr(&o));
}

#[test]
fn non_square_qam_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &MINIMAL.replace("constellation = 4", "constellation = 32"),
    );
    let o = vcm(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("M=32"), "{}", stderr(&o));
}

#[test]
fn guard_violation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL
        .replace("constellation = 4", "constellation = 64")
        .replace("users = [2]", "users = [4]");
    let cfg = write(dir.path(), "big.toml", &text);
    let o = vcm(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("2^20"), "{}", stderr(&o));
    let o = vcm(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let overridden = write(
        dir.path(),
        "ok.toml",
        &format!("guard_override = true\n{text}"),
    );
    assert!(vcm(&["validate", overridden.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn missing_file_is_config_error() {
    let o = vcm(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
}
