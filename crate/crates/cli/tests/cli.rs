use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tractoria"));
    c.env_remove("TRACTORIA_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = std::fs::read(path).unwrap();
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8(bytes[start..pos].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    let (w, h): (usize, usize) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    let data = bytes[pos + 1..].to_vec();
    assert_eq!(data.len(), w * h);
    (w, h, data)
}

#[test]
fn plot_exp_right_half_white() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("exp");
    let out = run(&["plot-tract", "--fn", "EXP", "--window", "-2,2,-2,2", "--res", "64", "--out", prefix.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (w, h, px) = read_pgm(&prefix.with_extension("pgm"));
    assert_eq!((w, h), (64, 64));
    for j in 0..h {
        for i in 0..w {
            assert_eq!(px[j * w + i], if i >= 32 { 255 } else { 0 }, "pixel {i},{j}");
        }
    }
    let svg = std::fs::read_to_string(prefix.with_extension("svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(prefix.with_extension("json").exists());
}

#[test]
fn plot_recip_exp_g_white_on_b_spines() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("g");
    let out = run(&["plot-tract", "--fn", "RECIP_EXP_G", "--window", "-40,40,-40,40", "--res", "320", "--out", prefix.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (w, _, px) = read_pgm(&prefix.with_extension("pgm"));
    // B_{j,2}: angle pi/4 + j pi/2, radii 8(1+eps) .. 16(1-2eps); midpoint near |z| = 12
    for j in 0..4 {
        let t = std::f64::consts::FRAC_PI_4 + j as f64 * std::f64::consts::FRAC_PI_2;
        let (x, y) = (12.0 * t.cos(), 12.0 * t.sin());
        // independent check of Re g at the midpoint, by direct summation
        let z = num_complex::Complex64::new(x, y);
        let g: num_complex::Complex64 = (1..12).map(|k| (z / 2f64.powi(k)).powu(1 << k)).sum();
        assert!(g.re < -16.0, "Re g = {}", g.re);
        let i = ((x + 40.0) / 80.0 * w as f64) as usize;
        let jj = ((40.0 - y) / 80.0 * w as f64) as usize;
        assert_eq!(px[jj * w + i], 255, "spine midpoint {j} is black");
    }
}

#[test]
fn verify_expansion_exit_zero() {
    let out = run(&["verify-expansion", "--fn", "EXP", "--samples", "10000", "--seed", "11"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["samples"], 10000);
    assert_eq!(v["seed"], 11);
}

#[test]
fn cover_certified_and_tampered() {
    let region = "rect:1,2,0,6.283185307179586";
    let ok = run(&["cover", "--fn", "EXP", "--region", region, "--annulus", "1.2,1.8"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["status"], "certified");
    let bad = run(&["cover", "--fn", "EXP", "--region", region, "--annulus", "2.5,3"]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(json(&bad)["status"], "refuted");
}

#[test]
fn harmonic_square_quarter() {
    let args = ["harmonic", "--fn", "EXP", "--region", "rect:0,1,0,1", "--arc", "0", "--walks", "20000", "--seed", "5"];
    let a = run(&args);
    assert!(a.status.success());
    let v = json(&a);
    let (w, ci) = (v["estimate"]["omega"].as_f64().unwrap(), v["estimate"]["ci95"].as_f64().unwrap());
    // bottom edge seen from the center of the square: 1/4 by symmetry
    assert!((w - 0.25).abs() <= 1.5 * ci, "omega {w} ci {ci}");
    assert_eq!(a.stdout, run(&args).stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["plot-tract", "--window", "1,0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["trace", "--fn", "NOPE"]).status.code(), Some(2));
    assert_eq!(run(&["cover", "--fn", "EXP"]).status.code(), Some(2));
    assert_eq!(run(&["slow-orbit", "--fn", "EXP", "--target", "1 +* n"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    let threads = bin().args(["trace", "--window", "-1,1,-1,1", "--res", "8"]).env("TRACTORIA_THREADS", "zero").output().unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    let out = run(&["slow-orbit", "--help"]);
    assert!(out.status.success());
    let s = String::from_utf8_lossy(&out.stdout);
    for needle in ["--fn", "--window", "--res", "--precision", "--seed", "--out", "--target", "--depth", "--mode", "[default: 12]"] {
        assert!(s.contains(needle), "missing {needle}");
    }
}

#[test]
fn slow_orbit_classify_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    let args = |p: &Path| {
        vec![
            "slow-orbit".to_string(),
            "--fn".into(),
            "EXP".into(),
            "--target".into(),
            "10 + 2*log(1+n)".into(),
            "--depth".into(),
            "12".into(),
            "--mode".into(),
            "theorem2".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    let a = bin().args(args(&p1)).output().unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin().args(args(&p2)).env("TRACTORIA_THREADS", "2").output().unwrap();
    assert_eq!(b.status.code(), Some(0));
    let (ja, jb) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(ja, jb, "reports differ across runs");
    let v: Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["all_bounds_pass"], true);
    let checks = v["report"]["witness"]["bound_checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true));

    let cl = run(&["classify", "--witness", p1.to_str().unwrap(), "--rho", "2", "--expect", "slow"]);
    assert_eq!(cl.status.code(), Some(0), "{}", String::from_utf8_lossy(&cl.stderr));
    assert_eq!(json(&cl)["verdict"], "slow");
    let wrong = run(&["classify", "--witness", p1.to_str().unwrap(), "--expect", "fast-consistent"]);
    assert_eq!(wrong.status.code(), Some(3));
}

#[test]
fn run_config_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command": "verify-convexity", "fn": "EXP", "radii": [4, 8], "cs": [1.5]}"#).unwrap();
    let a = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["verify-convexity", "--fn", "EXP", "--radii", "4,8", "--cs", "1.5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["all_pass"], true);
    std::fs::write(&cfg, r#"{"command": "trace", "colour": 3}"#).unwrap();
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
