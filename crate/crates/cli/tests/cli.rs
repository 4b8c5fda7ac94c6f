use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn weldsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weldsense")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// Float printed after `label:` on some stdout line.
fn reported(o: &Output, label: &str) -> f64 {
    let out = stdout(o);
    let line = out.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("no `{label}` in:\n{out}"));
    line[label.len()..].trim_start_matches(':').split_whitespace().next().unwrap().parse().unwrap()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

#[test]
fn flat_mirror_demo_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "flat.json");
    fs::write(&cfg, r#"{"mode": "specular", "scene": {"surface": {"kind": "flat", "z": 0.0}}}"#).unwrap();
    let out = p(&dir, "run");
    ok(weldsense(&["simulate", "--config", &cfg, "--seed", "7", "--out", &out]));
    let mut names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["ground_truth.ply", "metadata.json", "observations.csv"]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["rng"], weldsense::sim::RNG_ALGORITHM);
    assert_eq!(meta["seed"], 7);
}

#[test]
fn missing_surface_field_names_it() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "bad.json");
    fs::write(&cfg, r#"{"mode": "specular", "scene": {"surface": {"kind": "spherical_cap", "depth": 1.0}}}"#).unwrap();
    let o = weldsense(&["simulate", "--config", &cfg, "--seed", "1", "--out", &p(&dir, "run")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("radius"), "{}", stderr(&o));
}

#[test]
fn simulate_requires_seed_and_valid_tolerances() {
    let dir = TempDir::new().unwrap();
    let o = weldsense(&["simulate", "--mode", "diffuse", "--out", &p(&dir, "a")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--seed"));
    let o = weldsense(&["simulate", "--mode", "diffuse", "--seed", "1", "--tol-gap=-1", "--out", &p(&dir, "b")]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&weldsense(&["frobnicate"])), 2);
}

#[test]
fn seeded_rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    for mode in ["specular", "diffuse", "stereo", "profiles", "fringe"] {
        let a = p(&dir, &format!("{mode}_a"));
        let b = p(&dir, &format!("{mode}_b"));
        ok(weldsense(&["simulate", "--mode", mode, "--seed", "42", "--sigma", "0.1", "--out", &a]));
        ok(weldsense(&["simulate", "--mode", mode, "--seed", "42", "--sigma", "0.1", "--out", &b, "--threads", "1"]));
        for e in fs::read_dir(&a).unwrap() {
            let name = e.unwrap().file_name();
            let x = fs::read(Path::new(&a).join(&name)).unwrap();
            let y = fs::read(Path::new(&b).join(&name)).unwrap();
            assert!(x == y, "{mode}: {name:?} differs");
        }
        let c = p(&dir, &format!("{mode}_c"));
        ok(weldsense(&["simulate", "--mode", mode, "--seed", "43", "--sigma", "0.1", "--out", &c]));
        let x = fs::read(Path::new(&a).join("metadata.json")).unwrap();
        let y = fs::read(Path::new(&c).join("metadata.json")).unwrap();
        assert_ne!(x, y);
    }
}

#[test]
fn diffuse_pipeline_round_trip() {
    let dir = TempDir::new().unwrap();
    let run = p(&dir, "run");
    ok(weldsense(&["simulate", "--mode", "diffuse", "--seed", "1", "--out", &run]));
    let obs = format!("{run}/observations.csv");
    let calib = p(&dir, "calib.json");
    let o = ok(weldsense(&["calibrate", "--mode", "diffuse", "--input", &obs, "--out", &calib]));
    assert!(reported(&o, "camera residual") < 1e-9);
    let o = ok(weldsense(&[
        "reconstruct", "--mode", "diffuse", "--calib", &calib, "--input", &obs, "--truth", &format!("{run}/ground_truth.ply"),
        "--out", &p(&dir, "cloud.ply"),
    ]));
    assert!(reported(&o, "rms error") < 1e-6);
    assert!(dir.path().join("cloud_errors.csv").exists());
}

#[test]
fn calibrate_failures() {
    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.csv");
    fs::write(&bad, "Xw,Yw,Zw,xc,yc,ylg\n1,2,three,4,5,6\n").unwrap();
    let o = weldsense(&["calibrate", "--mode", "diffuse", "--input", &bad, "--out", &p(&dir, "c.json")]);
    assert_eq!(code(&o), 2);

    // One plane only: the height column is constant, so the system is rank deficient.
    let run = p(&dir, "run");
    ok(weldsense(&["simulate", "--mode", "diffuse", "--seed", "1", "--out", &run]));
    let all = fs::read_to_string(format!("{run}/observations.csv")).unwrap();
    let one: Vec<&str> = all.lines().filter(|l| l.starts_with("kind") || l.starts_with("plane0")).collect();
    let flat = p(&dir, "flat.csv");
    fs::write(&flat, one.join("\n") + "\n").unwrap();
    let o = weldsense(&["calibrate", "--mode", "diffuse", "--input", &flat, "--out", &p(&dir, "c.json")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("rank deficient"), "{}", stderr(&o));
}

#[test]
fn specular_pipeline_round_trip() {
    let dir = TempDir::new().unwrap();
    let run = p(&dir, "run");
    ok(weldsense(&["simulate", "--mode", "specular", "--seed", "5", "--out", &run]));
    let obs = format!("{run}/observations.csv");
    let calib = p(&dir, "calib.json");
    ok(weldsense(&["calibrate", "--mode", "specular", "--input", &obs, "--metadata", &format!("{run}/metadata.json"), "--out", &calib]));
    let errors = p(&dir, "errors.csv");
    let o = ok(weldsense(&[
        "reconstruct", "--mode", "specular", "--calib", &calib, "--input", &obs, "--truth", &format!("{run}/ground_truth.ply"),
        "--out", &p(&dir, "cloud.ply"), "--errors", &errors,
    ]));
    assert!(reported(&o, "rms error") < 1e-8);
    assert_eq!(fs::read_to_string(&errors).unwrap().lines().count(), 156);
    assert!(fs::read_to_string(p(&dir, "cloud.ply")).unwrap().contains("property double gap"));

    let o = weldsense(&["reconstruct", "--mode", "specular", "--calib", &p(&dir, "nope.json"), "--input", &obs, "--out", &p(&dir, "x.ply")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stereo_both_triangulations_agree_with_truth() {
    let dir = TempDir::new().unwrap();
    let run = p(&dir, "run");
    ok(weldsense(&["simulate", "--mode", "stereo", "--seed", "1", "--out", &run]));
    for mode in ["stereo-ray", "stereo-rectified"] {
        let o = ok(weldsense(&[
            "reconstruct", "--mode", mode, "--calib", &format!("{run}/metadata.json"), "--input", &format!("{run}/observations.csv"),
            "--truth", &format!("{run}/ground_truth.ply"), "--out", &p(&dir, &format!("{mode}.ply")),
        ]));
        assert!(reported(&o, "rms error") < 1e-6, "{mode}");
    }
}

fn write_profile_csv(path: &str, frames: &[Vec<(f64, f64)>]) {
    let mut s = String::from("frame,u,z\n");
    for (k, f) in frames.iter().enumerate() {
        for (u, z) in f {
            s.push_str(&format!("{k},{u},{z}\n"));
        }
    }
    fs::write(path, s).unwrap();
}

fn trapezoid(u: f64, top: f64, bottom: f64, depth: f64) -> f64 {
    let a = u.abs();
    if a >= top / 2.0 {
        0.0
    } else if a <= bottom / 2.0 {
        -depth
    } else {
        -depth + (a - bottom / 2.0) * depth / ((top - bottom) / 2.0)
    }
}

fn frame(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..=300).map(|k| -15.0 + 0.1 * k as f64).map(|u| (u, f(u))).collect()
}

fn report(o: &Output, path: &str) -> serde_json::Value {
    ok(Output { status: o.status, stdout: o.stdout.clone(), stderr: o.stderr.clone() });
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_fixtures() {
    let dir = TempDir::new().unwrap();
    // Clean groove, two identical frames.
    let clean = p(&dir, "clean.csv");
    write_profile_csv(&clean, &[frame(|u| trapezoid(u, 12.0, 4.0, 3.0)), frame(|u| trapezoid(u, 12.0, 4.0, 3.0))]);
    let out = p(&dir, "clean.json");
    let r = report(&weldsense(&["analyze", "--input", &clean, "--out", &out, "--features", &p(&dir, "f.csv")]), &out);
    for k in ["misalignment", "displacement", "height_mutation", "undercut"] {
        assert_eq!(r["flags"][k], false, "{k}");
        assert!(r["magnitudes"][k].is_null());
    }
    assert_eq!(fs::read_to_string(p(&dir, "f.csv")).unwrap().lines().count(), 3);

    // Smooth bead spilling far past a narrow groove: W_b > W_g.
    let under = p(&dir, "undercut.csv");
    write_profile_csv(&under, &[frame(|u| 1.5 * (-u * u / 8.0).exp() + trapezoid(u, 4.0, 2.0, 1.0))]);
    let out = p(&dir, "undercut.json");
    let r = report(&weldsense(&["analyze", "--input", &under, "--out", &out, "--overlay", &p(&dir, "o.csv")]), &out);
    assert_eq!(r["flags"]["undercut"], true);
    assert!(r["magnitudes"]["undercut"].as_f64().unwrap() > 5.0);
    assert!(fs::read_to_string(p(&dir, "o.csv")).unwrap().contains("baseline"));

    // Stream with a 1 mm step in bead height at frame 6.
    let stream = p(&dir, "stream.csv");
    let frames: Vec<_> = (0..10)
        .map(|k| {
            let h = 1.0 + 0.02 * k as f64 + if k >= 6 { 1.0 } else { 0.0 };
            frame(move |u| trapezoid(u, 6.0, 2.0, 2.0).max(if u.abs() < 3.0 { h * (1.0 - u * u / 9.0) } else { 0.0 }))
        })
        .collect();
    write_profile_csv(&stream, &frames);
    let out = p(&dir, "stream.json");
    let r = report(&weldsense(&["analyze", "--input", &stream, "--out", &out]), &out);
    assert_eq!(r["flags"]["height_mutation"], true);
    assert_eq!(r["height_mutation_frames"], serde_json::json!([6]));

    let out = p(&dir, "pool.json");
    let r = report(&weldsense(&["analyze", "--input", &clean, "--out", &out, "--pool=-1,12,1,8"]), &out);
    assert_eq!(r["penetration"], "burn_through");
}

#[test]
fn phase_commands() {
    let dir = TempDir::new().unwrap();
    let run = p(&dir, "run");
    ok(weldsense(&["simulate", "--mode", "fringe", "--seed", "1", "--out", &run]));
    let pat = |k: usize| format!("{run}/pattern_{k}.pgm");
    let truth = format!("{run}/ground_truth.f32");
    let o = ok(weldsense(&[
        "phase", "--method", "psp4", "--images", &pat(0), &pat(1), &pat(2), &pat(3), "--truth", &truth, "--out", &p(&dir, "psp"),
        "--unwrap", "linear-row",
    ]));
    // 16-bit grey levels bound the error well below a milliradian.
    assert!(reported(&o, "max wrapped-phase error") < 1e-3);
    assert!(dir.path().join("psp/unwrapped.f32").exists());

    let o = weldsense(&["phase", "--method", "pspN", "--images", &pat(0), &pat(1), "--out", &p(&dir, "two")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("at least 3"));

    let o = ok(weldsense(&["phase", "--method", "ftp", "--freq", "16", "--images", &pat(0), "--truth", &truth, "--out", &p(&dir, "ftp")]));
    assert!(dir.path().join("ftp/phase.f32").exists() && dir.path().join("ftp/phase.f32.json").exists());
    assert!(dir.path().join("ftp/mask.pgm").exists());
    assert!(reported(&o, "max wrapped-phase error") < 0.05);
}
