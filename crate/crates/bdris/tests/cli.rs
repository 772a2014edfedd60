use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use bdris::cli::{run_cli, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

const SMALL: &str = "[system]\nk = 4\nn = 2\nm = 2\n[power]\npt_dbm = 30\n[experiment]\nrealizations = 1\n";

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bdris").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gradcheck_reports_small_error() {
    let (code, out, _) = cli(&["gradcheck", "--K", "6", "--N", "3", "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    let err: f64 = out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-5, "{out}");
}

#[test]
fn gradcheck_fails_with_a_coarse_step() {
    let (code, _, err) = cli(&["gradcheck", "--step", "0.5"]);
    assert_eq!(code, EXIT_RUNTIME, "{err}");
}

#[test]
fn validate_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "empty.toml", "");
    let (code, out, _) = cli(&["validate-config", &path]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("k = [32]"), "{out}");
}

#[test]
fn invalid_config_lists_problems() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "[system]\nk = 30\narch = \"group\"\ngroups = 4\n");
    let (code, _, err) = cli(&["validate-config", &path]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("line 4") && err.contains("group size not integral"), "{err}");
    let (code, _, _) = cli(&["validate-config", "/nonexistent/cfg.toml"]);
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["run", "x.toml", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("gradcheck"));
}

#[test]
fn sweep_covers_inclusive_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let csv = dir.path().join("out.csv");
    let (code, _, err) = cli(&["sweep", &cfg, "--param", "K=8:32:8", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = fs::read_to_string(&csv).unwrap();
    let ks: BTreeSet<usize> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(ks, BTreeSet::from([8, 16, 24, 32]));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn sweep_rejects_indivisible_group_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[system]\nk = 8\nn = 2\nm = 2\narch = \"group\"\ngroups = 4\n[experiment]\nrealizations = 1\n";
    let cfg = write(dir.path(), "c.toml", text);
    let (code, _, err) = cli(&["sweep", &cfg, "--param", "K=8:12:2"]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("divisible"), "{err}");
}

#[test]
fn run_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &SMALL.replace("realizations = 1", "realizations = 3").replace("k = 4", "k = [4, 6]"),
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(cli(&["run", &cfg, "--workers", "1", "--out", a.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(cli(&["run", &cfg, "--workers", "3", "--out", b.to_str().unwrap()]).0, EXIT_OK);
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 1 + 2 * 2 * 3);
    let c = dir.path().join("c.csv");
    assert_eq!(cli(&["run", &cfg, "--seed", "5", "--out", c.to_str().unwrap()]).0, EXIT_OK);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn run_without_output_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let (code, out, err) = cli(&["run", &cfg]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("framework,arch,mode,K,L,pt_dbm,seed,se_bps_hz,outer_iters,stalled,wall_ms\n"));
    assert_eq!(out.lines().count(), 3);
    assert!(err.contains("mean"));
}

#[test]
fn timing_fills_wall_clock_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let (_, out, _) = cli(&["run", &cfg, "--timing"]);
    assert!(out.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0));
    let (_, out, _) = cli(&["run", &cfg]);
    assert!(out.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn plot_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let csv = dir.path().join("r.csv");
    let svg = dir.path().join("p.svg");
    assert_eq!(cli(&["sweep", &cfg, "--param", "K=4:6:2", "--out", csv.to_str().unwrap()]).0, EXIT_OK);
    let (code, _, err) = cli(&["plot", "--in", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let first = fs::read(&svg).unwrap();
    assert!(String::from_utf8_lossy(&first).contains("BD-RIS, 30 dBm"));
    assert_eq!(cli(&["plot", "--in", csv.to_str().unwrap(), "--out", svg.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(fs::read(&svg).unwrap(), first);

    let single = dir.path().join("s.csv");
    assert_eq!(cli(&["run", &cfg, "--out", single.to_str().unwrap()]).0, EXIT_OK);
    let (code, _, err) = cli(&["plot", "--in", single.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains("`run`") && err.contains("sweep"), "{err}");
}

#[test]
fn configured_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cfg.csv");
    let svg = dir.path().join("cfg.svg");
    let text = format!(
        "{}[output]\ncsv = {:?}\nplot = {:?}\n",
        SMALL.replace("k = 4", "k = [4, 6]"),
        csv.to_str().unwrap(),
        svg.to_str().unwrap()
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let (code, out, _) = cli(&["run", &cfg]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("wrote 4 rows"));
    assert!(csv.exists() && svg.exists());
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_bdris");
    let ok = Command::new(exe).args(["gradcheck", "--K", "4", "--N", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let usage = Command::new(exe).args(["gradcheck", "--nope"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
    let runtime = Command::new(exe).args(["validate-config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(runtime.status.code(), Some(EXIT_RUNTIME));
}
