use std::path::PathBuf;
use std::process::{Command, Output};

fn dpmqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmqkd"))
        .args(args)
        .env_remove("DPMQKD_OUT_DIR")
        .output()
        .expect("launch dpmqkd")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dpmqkd-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn exit_codes() {
    assert_eq!(dpmqkd(&["--help"]).status.code(), Some(0));
    assert_eq!(dpmqkd(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(dpmqkd(&["asymptotic-sweep", "--v", "-2"]).status.code(), Some(1));
    assert_eq!(dpmqkd(&["simulate", "--gain", "fast"]).status.code(), Some(1));
    assert_eq!(dpmqkd(&["asymptotic-sweep", "--dmin", "5", "--dmax", "1"]).status.code(), Some(1));
    let injected = dpmqkd(&["dpm-verify", "--inject-error", "--trials", "20", "--samples", "1000", "--no-timestamp"]);
    assert_eq!(injected.status.code(), Some(3));
    assert!(stdout(&injected).contains("mirror_compensation"));
}

#[test]
fn header_layout_and_single_row() {
    let out = dpmqkd(&["asymptotic-sweep", "--dmin", "0", "--dmax", "0", "--no-timestamp"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: dpmqkd/asymptotic-sweep/1"));
    assert!(lines.next().unwrap().starts_with("# version: "));
    assert!(!text.contains("generated_unix_s"));
    assert_eq!(data_rows(&text).len(), 1);

    let stamped = stdout(&dpmqkd(&["asymptotic-sweep", "--dmin", "0", "--dmax", "0"]));
    assert!(stamped.lines().nth(2).unwrap().starts_with("# generated_unix_s: "));
}

#[test]
fn flags_override_config_and_env_dir_is_used() {
    let dir = scratch("config");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# sweep\ndmin = 0\ndmax = 2\ndstep = 1\nv = 30\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dpmqkd"))
        .args(["asymptotic-sweep", "--config", cfg.to_str().unwrap(), "--v", "20", "--no-timestamp"])
        .env("DPMQKD_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.join("asymptotic-sweep.csv")).unwrap();
    assert!(text.contains("# v_snu: 2.0000000000000000e1"), "{text}");
    assert_eq!(data_rows(&text).len(), 3);

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let bad = dpmqkd(&["asymptotic-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn tiny_simulation_is_flagged() {
    let out = dpmqkd(&["simulate", "--pulses", "10", "--no-timestamp"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient statistics"));
    let text = stdout(&out);
    let flag = data_rows(&text).into_iter().find(|l| l.starts_with("insufficient_statistics,")).unwrap();
    assert!(flag.starts_with("insufficient_statistics,1.0"));
}

#[test]
fn finite_self_check_passes_on_defaults() {
    let out = dpmqkd(&["finite-size-sweep", "--self-check", "--dstep", "1", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
