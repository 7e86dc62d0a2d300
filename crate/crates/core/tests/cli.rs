//! End-to-end runs of the `forest-link` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forest_link::pathloss::{pl_ci, LinkGeometry};
use forest_link::tool::config::CONFIG_ENV;
use forest_link::tool::Report;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forest-link"))
        .args(args)
        .env_remove(CONFIG_ENV)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> PathBuf {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

fn report(path: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_of(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON record");
    v["error"].clone()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_recovers_noiseless_ci_exponent() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("ci.csv");
    let mut text = String::from("dist_m,pl_db\n");
    for i in 0..40 {
        let dist = 5.0 * 1.1f64.powi(i);
        text += &format!("{dist},{}\n", pl_ci(&LinkGeometry::new(1.4, dist), 2.9).unwrap());
    }
    std::fs::write(&csv, text).unwrap();
    let out = d.path().join("o");
    let r = report(&run_ok(&["--out", s(&out), "fit", s(&csv), "--family", "ci,fspl"]));
    let ci = r.fits.iter().find(|f| f.family == "ci").unwrap();
    assert!((ci.params["n"] - 2.9).abs() < 1e-6, "n = {}", ci.params["n"]);
    assert!(ci.rmse_db < 1e-6);
    assert!(r.fits.iter().any(|f| f.family == "fspl" && f.rmse_db > 1.0));
    for a in ["fit.csv", "fit.svg"] {
        assert!(out.join(a).exists(), "{a}");
    }
}

#[test]
fn sound_is_reproducible_across_runs_and_directories() {
    let d = TempDir::new().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let ra = run_ok(&["--out", s(&a), "--seed", "7", "sound"]);
    let rb = run_ok(&["--out", s(&b), "--seed", "7", "sound"]);
    for f in ["cir_zc.csv", "cir_cfr.csv", "cfr.csv", "taps.csv", "profile.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read(ra).unwrap(), std::fs::read(rb).unwrap());
    let c = d.path().join("c");
    run_ok(&["--out", s(&c), "--seed", "8", "sound"]);
    assert_ne!(std::fs::read(a.join("cir_zc.csv")).unwrap(), std::fs::read(c.join("cir_zc.csv")).unwrap());
}

#[test]
fn captured_hex_extracts_like_the_live_sounding() {
    let d = TempDir::new().unwrap();
    let snd = report(&run_ok(&["--out", s(d.path()), "--seed", "3", "sound", "--snr", "inf", "--capture"]));
    let hex = d.path().join("capture.hex");
    let cap = d.path().join("cap");
    let ext = report(&run_ok(&["--out", s(&cap), "extract", s(&hex), s(&hex)]));
    let row = &ext.channel_stats[0];
    assert_eq!(row.n_captures, 2);
    // 16-bit quantization is the only difference.
    let live = snd.metrics["rms_ds_ns"];
    assert!((row.rms_ds_ns.mu - live).abs() <= 0.01 * live.max(1.0), "{} vs {live}", row.rms_ds_ns.mu);
}

#[test]
fn synthetic_extract_tracks_site_statistics() {
    let d = TempDir::new().unwrap();
    let r = report(&run_ok(&["--out", s(d.path()), "--seed", "11", "extract", "--forest", "larch", "--scenario", "g2g"]));
    let row = &r.channel_stats[0];
    assert_eq!(row.n_captures, 1000);
    assert!((row.rms_ds_ns.mu - 49.5).abs() <= 0.03 * 49.5, "DS mean {}", row.rms_ds_ns.mu);
    let k = row.k_db.unwrap();
    assert!((k.mu - 19.8).abs() <= 0.05 * 19.8, "K mean {}", k.mu);
    assert!(row.ds_k_pearson.unwrap() < 0.0);
}

#[test]
fn simulate_angular_and_report_merge() {
    let d = TempDir::new().unwrap();
    let o = d.path();
    run_ok(&["--out", s(o), "simulate", "--forest", "birch", "--scenario", "a2g-30", "--d-min", "10", "--d-max", "640"]);
    let curves = std::fs::read_to_string(o.join("curves.csv")).unwrap();
    assert!(curves.starts_with("dist_m,fspl,fe2r,fe2r-m,okumura-hata\n"), "{}", curves.lines().next().unwrap());
    let fit = report(&run_ok(&["--out", s(o), "fit", s(&o.join("samples.csv"))]));
    assert!(fit.fits.iter().any(|f| f.family == "fe2r-m"));
    assert!(fit.notes.iter().any(|n| n.starts_with("okumura-hata:")));

    let sweep = o.join("sweep.csv");
    let mut text = String::from("azimuth_deg,rssi_dbm\n");
    for i in 0..12 {
        text += &format!("{},{}\n", 30 * i, if i == 4 { -50.0 } else { -200.0 });
    }
    std::fs::write(&sweep, text).unwrap();
    let ang = report(&run_ok(&["--out", s(o), "angular", s(&sweep)]));
    assert_eq!(ang.angular[0].peak_azimuth_deg, 120.0);
    assert!(ang.angular[0].rms_asa_deg < 1e-3);

    let merged = report(&run_ok(&["--out", s(o), "report"]));
    assert_eq!(merged.metrics["reports_merged"], 3.0);
    assert_eq!(merged.angular.len(), 1);
    assert!(merged.metrics.contains_key("simulate.shadowing_sigma_db"));
    assert!(std::fs::read_to_string(o.join("report_fits.csv")).unwrap().contains("fe2r-m,xi_r,"));
}

#[test]
fn mixed_scenario_is_rejected_by_simulate() {
    let d = TempDir::new().unwrap();
    let out = run(&["--out", s(d.path()), "simulate", "--scenario", "mixed"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["code"], "E_DOMAIN");
}

#[test]
fn input_errors_name_file_and_line() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("bad.csv");
    std::fs::write(&csv, "dist_m,pl_db\n10,70\n20,oops\n").unwrap();
    let out = run(&["--out", s(d.path()), "fit", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["code"], "E_PARSE");
    assert_eq!(e["file"], s(&csv));
    assert_eq!(e["line"], 3);

    let hex = d.path().join("bad.hex");
    std::fs::write(&hex, "0001 0002 zz03 0004\n").unwrap();
    let out = run(&["--out", s(d.path()), "extract", s(&hex)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["code"], "E_HEX_PARSE");
}

#[test]
fn config_errors_and_environment_lookup() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 1\nframe.n_fft = banana\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_forest-link"))
        .args(["--out", s(d.path()), "sound"])
        .env(CONFIG_ENV, &cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["code"], "E_CONFIG");
    assert_eq!(e["line"], 2);
}

#[test]
fn computation_failures_exit_3_and_usage_errors_exit_2() {
    let d = TempDir::new().unwrap();
    let out = run(&["--out", s(d.path()), "sound", "--snr", "-40"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["code"], "E_SYNC");

    let out = run(&["no-such-verb"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["code"], "E_USAGE");
    assert!(run(&["--help"]).status.success());
}
