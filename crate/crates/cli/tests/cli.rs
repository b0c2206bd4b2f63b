use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[grid]
Nr = 16
Nz = 16
R0 = 1.0
Lz = 6.283185307179586
[wall]
RS = 2.718281828
[time]
T = 0.05
[physics]
C0 = 1.0
[initial]
preset = "perturbed_pinch(0.5, 0.5, 0.01)"
[output]
directory = "unused"
"#;

fn axmhd(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_axmhd"));
    cmd.args(args).env_remove("AXMHD_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("AXMHD_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_outputs_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = axmhd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("diagnostics.ndjson").exists());
    assert!(out.join("snapshot_000000.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("converged     true"));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("from_env");
    let o = axmhd(&["--quiet", "run", "--config", &cfg], Some(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert!(out.join("diagnostics.ndjson").exists());
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o");
    let o = axmhd(
        &[
            "--quiet",
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--override",
            "output.emit_fields=false",
            "--override",
            "initial.preset=rest",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("snapshot_000000.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = axmhd(&["run", "--config", &cfg, "--override", "wall.RS=0.5"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wall.RS"));

    let o = axmhd(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));

    let o = axmhd(&["run", "--config", &cfg, "--override", "initial.preset=mms(1)"], None);
    assert_eq!(o.status.code(), Some(2));

    let o = axmhd(&["run", "--config", &cfg, "--override", "time.dt=5.0", "--override", "time.T=10.0"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_passes() {
    let o = axmhd(&["verify"], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn mms_prints_orders() {
    let o = axmhd(&["mms", "--case", "3", "--grids", "16,32"], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("order"));
    let o = axmhd(&["mms", "--case", "7"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn equilibrium_reports_balance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("perturbed_pinch(0.5, 0.5, 0.01)", "screw_pinch(0.5, 0.5)"));
    let o = axmhd(&["equilibrium", "--config", &cfg], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("acceleration"));
}
