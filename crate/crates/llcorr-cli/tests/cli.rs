//! The `llcorr` binary end to end: files, exit codes, error records, determinism and the cache.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn llcorr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llcorr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LLCORR_CACHE")
        .output()
        .expect("binary runs")
}

fn stderr_record(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().expect("an error line")).expect("stderr holds a JSON record")
}

#[test]
fn thermo_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = llcorr(&["thermo", "--c", "inf", "--h", "1", "--T", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["residual"].as_f64().unwrap() < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("thermo.csv")).unwrap();
    assert!(csv.starts_with("c,h,T,alpha_re,alpha_im,re_pressure,"));
    assert!(csv.lines().nth(1).unwrap().starts_with("inf,1.0000000000000000e0,"));
    assert!(dir.path().join("thermo_state.json").exists());
}

#[test]
fn sweeps_are_byte_identical_and_cache_hits_match() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["lengths", "--h", "2:3:0.5", "--selection", "+R1;-R1|+R1;-L1"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cached = dir.path().join("cached");
    let cache = dir.path().join("cache");
    assert!(llcorr(&args, &a).status.success());
    assert!(llcorr(&args, &b).status.success());
    let first = std::fs::read(a.join("lengths.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.join("lengths.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 7);

    let mut with_cache: Vec<&str> = args.to_vec();
    with_cache.extend(["--cache", cache.to_str().unwrap()]);
    assert!(llcorr(&with_cache, &cached).status.success());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 6);
    // second run is served from the cache
    assert!(llcorr(&with_cache, &cached).status.success());
    assert_eq!(first, std::fs::read(cached.join("lengths.csv")).unwrap());
}

#[test]
fn failed_rows_are_written_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = llcorr(&["lengths", "--c", "10", "--h", "3,4", "--selection", "+R1;-R1|+R9;-R9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let rec = stderr_record(&o);
    assert_eq!(rec["error"], "solver_failure");
    assert_eq!(rec["failed_rows"], 2);
    assert_eq!(rec["total_rows"], 4);
    let csv = std::fs::read_to_string(dir.path().join("lengths.csv")).unwrap();
    let flags: Vec<&str> = csv.lines().skip(1).map(|l| if l.contains(",true,") { "ok" } else { "failed" }).collect();
    assert_eq!(flags, vec!["ok", "failed", "ok", "failed"]);
}

#[test]
fn bad_configuration_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = llcorr(&["lengths", "--h", "1,2", "--T", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let rec = stderr_record(&o);
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["command"], "lengths");

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "h = 1\nspeed = 3\n").unwrap();
    let o = llcorr(&["thermo", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_record(&o)["message"].as_str().unwrap().contains("speed"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "c = 10\nh = 4\nT = 2\nm-max = 1\n").unwrap();
    let o = llcorr(&["poles", "--config", cfg.to_str().unwrap(), "--m-max", "0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["poles"].as_array().unwrap().len(), 4);
    assert_eq!(summary["winding_upper"], summary["table_upper"]);
    let nearest = summary["nearest_pole_distance"].as_f64().unwrap();
    let min_im = summary["poles"].as_array().unwrap().iter().map(|p| p["r"][1].as_f64().unwrap().abs()).fold(f64::INFINITY, f64::min);
    assert_eq!(nearest, min_im);
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = llcorr(&["verify", "--only", "1,8"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().next().unwrap().starts_with("criterion  1 PASS"));
    assert!(stdout.lines().nth(1).unwrap().starts_with("criterion  8 FAIL"));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_record(&o)["failed_criteria"], serde_json::json!([8]));
    assert!(dir.path().join("acceptance.txt").exists());
}
