use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn polygons() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../polygons")
}

fn billiard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_billiard")).args(args).env_remove("BILLIARD_PRECISION_BITS").output().unwrap()
}

fn poly(name: &str) -> String {
    polygons().join(name).display().to_string()
}

#[test]
fn count_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = billiard(&["count", "--polygon", &poly("square.json"), "--depth", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: {"));
    assert_eq!(lines.next().unwrap(), "n,p,p_min,p_max,Nc_oriented,Nc_unoriented,uncertain");
    assert!(lines.next().unwrap().starts_with("1,4,4,4,"));
    assert!(lines.next().unwrap().starts_with("2,12,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.csv.manifest.json")).unwrap()).unwrap();
    for key in ["command_line", "polygon_hash", "seed", "precision_bits", "version", "wall_time_s", "uncertainty"] {
        assert!(manifest.get(key).is_some(), "missing {key}");
    }
    assert_eq!(manifest["precision_bits"], 256);
}

#[test]
fn identity_prints_convention_and_pass() {
    let o = billiard(&["identity", "--polygon", &poly("square.json"), "--depth", "8"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("convention: oriented connections"), "{text}");
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn self_intersecting_polygon_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = billiard(&["count", "--polygon", &poly("bowtie.json"), "--depth", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SelfIntersecting"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(billiard(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(billiard(&["count", "--depth", "3"]).status.code(), Some(1));
    assert_eq!(billiard(&["--help"]).status.code(), Some(0));
}

#[test]
fn precision_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let run = |bits: &str| {
        Command::new(env!("CARGO_BIN_EXE_billiard"))
            .args(["count", "--polygon", &poly("staircase.json"), "--depth", "4", "--out", out.to_str().unwrap()])
            .env("BILLIARD_PRECISION_BITS", bits)
            .output()
            .unwrap()
    };
    assert_eq!(run("3").status.code(), Some(2));
    assert_eq!(run("zero").status.code(), Some(1));
    assert_eq!(run("256").status.code(), Some(0));
}

fn csv_at(threads: &str, args: &[&str]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let mut full = vec!["--threads", threads];
    full.extend_from_slice(args);
    full.extend(["--out", out.to_str().unwrap()]);
    let o = billiard(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let sq = poly("square.json");
    let st = poly("staircase.json");
    let runs: [Vec<&str>; 4] = [
        vec!["count", "--polygon", &st, "--depth", "4"],
        vec!["--seed", "9", "metric", "ba-curve", "--polygon", &sq, "--samples", "5000"],
        vec!["--seed", "9", "metric", "cover", "--polygon", &st, "--samples", "3000", "--n", "6"],
        vec!["--seed", "4", "perturb", "persist", "--polygon", &sq, "--trials", "2", "--depth", "3"],
    ];
    for args in &runs {
        assert_eq!(csv_at("1", args), csv_at("3", args), "{args:?}");
    }
}

#[test]
fn seed_changes_sampled_output() {
    let sq = poly("square.json");
    let a = csv_at("2", &["--seed", "1", "metric", "ba-curve", "--polygon", &sq, "--samples", "2000"]);
    let b = csv_at("2", &["--seed", "2", "metric", "ba-curve", "--polygon", &sq, "--samples", "2000"]);
    assert_ne!(a, b);
}

#[test]
fn simulate_rows_follow_the_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = billiard(&[
        "simulate", "--polygon", &poly("square.json"), "--side", "A", "--s", "0.5", "--theta", "1.5707963267948966",
        "--steps", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let sides: Vec<&str> = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(sides, ["A", "C", "A", "C", "A"]);
    let last: f64 = text.lines().last().unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((last - 4.0).abs() < 1e-12);
}

#[test]
fn singular_start_reports_the_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = billiard(&[
        "simulate", "--polygon", &poly("square.json"), "--side", "A", "--s", "0", "--theta", "0.7853981633974483",
        "--steps", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vertex"));
}

#[test]
fn scan_finds_events_on_the_staircase_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = billiard(&["perturb", "scan", "--family", &poly("staircase_family.json"), "--depth", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.lines().any(|l| l.contains(",1-6:")), "{text}");
}

#[test]
fn unfold_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("u.svg");
    let o = billiard(&["unfold", "--polygon", &poly("square.json"), "--word", "ABCD", "--svg", svg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.matches("<polygon").count() == 4);
    assert!(dir.path().join("u.svg.manifest.json").exists());
    let bad = billiard(&["unfold", "--polygon", &poly("square.json"), "--word", "AAB", "--svg", svg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}
