//! End-to-end checks of the command-line interface: exit codes, output
//! files, and the plumbing between subcommands. Numerical accuracy is
//! covered by the library tests; these runs use deliberately tiny grids.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;

use cpcg::constants::ETA0;
use cpcg::engine::monitor::PlaneRecord;
use cpcg::output::save_plane_record;

fn cpcg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpcg"))
}

fn run(args: &[&str]) -> Output {
    cpcg().args(args).output().expect("binary launches")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Pull `key = value` off the stdout report of the post-processing commands.
fn report_value(stdout: &str, key: &str) -> f64 {
    for line in stdout.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key} = ")) {
            let number = rest.split_whitespace().next().unwrap();
            return number.parse().unwrap();
        }
    }
    panic!("no `{key} = ...` line in:\n{stdout}");
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        dir.path().join("absent.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("cannot read"));
    assert!(!out_dir.exists(), "nothing should be created on bad input");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[device]\nradius = 700\n[run]\nresolution_nm = 100.0\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("config error"));
}

#[test]
fn unknown_sweep_axis_lists_the_choices() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        "[sweep]\naxis = \"bogus\"\n[run]\nresolution_nm = 100.0\n",
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("dipole_x"), "axis list missing: {err}");
}

#[test]
fn excessive_displacement_is_rejected_before_any_run() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    // Default disk radius is 760 nm, so 500 nm exceeds the half-radius cap.
    fs::write(
        &plan,
        "[sweep]\naxis = \"dipole_x\"\nvalues = [0.0, 500.0]\n[run]\nresolution_nm = 100.0\n",
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("half the central disk radius"));
}

#[test]
fn geometry_emits_the_hole_table() {
    let out = run(&["geometry"]);
    assert_eq!(out.status.code(), Some(0));
    let table = stdout_of(&out);
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("ring,m,x_nm,y_nm,diameter_nm"));
    assert_eq!(lines.count(), 660, "reference design has 12 * sum(1..=10) holes");
    assert!(stderr_of(&out).contains("holes = 660"));
}

#[test]
fn geometry_respects_the_config_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dev.toml");
    fs::write(&cfg, "[device]\nN_rings = 2\n[run]\nresolution_nm = 40.0\n").unwrap();
    let table = dir.path().join("holes.csv");
    let out = run(&[
        "geometry",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 1 + 12 + 24, "header plus two rings");
    assert!(stdout_of(&out).contains("holes = 36"));
}

#[test]
fn bad_validate_scale_is_a_usage_error() {
    let out = run(&["validate", "--p-hom-scale", "-1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn conflicting_height_flags_are_rejected() {
    let out = run(&[
        "fibercouple",
        "--monitor",
        "x.bin",
        "--fiber",
        "980-HP",
        "--height-um",
        "1.0",
        "--optimize-h",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

/// A single-wavelength plane record carrying a centered Gaussian beam that
/// matches the 980-HP mode (1/e amplitude radius 3.4 um), propagating
/// upward: Hy = Ex / eta0.
fn gaussian_plane(dir: &Path) -> std::path::PathBuf {
    let n = 101;
    let delta_m = 0.3e-6;
    let x0 = -((n - 1) as f64) / 2.0 * delta_m;
    let w = 3.4e-6;
    let npts = n * n;
    let mut ex = vec![Complex64::new(0.0, 0.0); npts];
    let mut hy = vec![Complex64::new(0.0, 0.0); npts];
    for iy in 0..n {
        for ix in 0..n {
            let x = x0 + ix as f64 * delta_m;
            let y = x0 + iy as f64 * delta_m;
            let a = (-(x * x + y * y) / (w * w)).exp();
            ex[iy * n + ix] = Complex64::new(a, 0.0);
            hy[iy * n + ix] = Complex64::new(a / ETA0, 0.0);
        }
    }
    let rec = PlaneRecord {
        lambdas_nm: vec![1550.0],
        delta_m,
        nx: n,
        ny: n,
        x0_m: x0,
        y0_m: x0,
        z_above_ref_m: 0.0,
        ex,
        ey: vec![Complex64::new(0.0, 0.0); npts],
        hx: vec![Complex64::new(0.0, 0.0); npts],
        hy,
        not_decayed: false,
    };
    let path = dir.join("gaussian.plane.bin");
    save_plane_record(&path, &rec).unwrap();
    path
}

#[test]
fn fibercouple_recovers_a_matched_gaussian_mode() {
    let dir = tempfile::tempdir().unwrap();
    let plane = gaussian_plane(dir.path());
    let out = run(&[
        "fibercouple",
        "--monitor",
        plane.to_str().unwrap(),
        "--fiber",
        "980-HP",
        "--height-um",
        "0.0",
        "--pad",
        "256",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let eta = report_value(&text, "eta_mc");
    assert!(eta > 0.99, "matched mode at zero height couples fully, got {eta}");
    assert_eq!(report_value(&text, "lambda_nm"), 1550.0);
}

#[test]
fn fibercouple_folds_in_an_efficiency_table() {
    let dir = tempfile::tempdir().unwrap();
    let plane = gaussian_plane(dir.path());
    let table = dir.path().join("eta_ext.csv");
    fs::write(&table, "lambda_nm,eta_ext\n1500,0.25\n1600,0.5\n").unwrap();
    let out = run(&[
        "fibercouple",
        "--monitor",
        plane.to_str().unwrap(),
        "--fiber",
        "980-HP",
        "--height-um",
        "0.0",
        "--pad",
        "256",
        "--eta-ext",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    // 1550 nm sits exactly between the table points; nearest-sample lookup
    // keeps whichever comes first in scan order, and the product follows.
    let eta_ext = report_value(&text, "eta_ext");
    let eta_mc = report_value(&text, "eta_mc");
    let eta_fiber = report_value(&text, "eta_fiber");
    assert!((eta_fiber - eta_ext * eta_mc).abs() < 1e-12);
}

#[test]
fn unknown_fiber_names_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let plane = gaussian_plane(dir.path());
    let out = run(&[
        "fibercouple",
        "--monitor",
        plane.to_str().unwrap(),
        "--fiber",
        "UHNA-3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("presets"));
}

#[test]
fn farfield_reports_the_aperture_fraction_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let plane = gaussian_plane(dir.path());
    let csv = dir.path().join("ff.csv");
    let out = run(&[
        "farfield",
        "--monitor",
        plane.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--pad",
        "256",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let eta_obj = report_value(&stdout_of(&out), "eta_obj");
    // A 3.4 um waist at 1550 nm diverges only ~8 degrees; an NA = 0.7 lens
    // (44 degree half-angle) captures essentially all of it.
    assert!(eta_obj > 0.99 && eta_obj <= 1.0, "got {eta_obj}");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("theta_deg,phi_deg,power_density\n"));
    assert!(text.lines().count() > 1000, "full angular table expected");
}

fn smoke_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("smoke.toml");
    fs::write(
        &cfg,
        "[device]\nN_rings = 0\n\n[run]\nresolution_nm = 100.0\nn_lambda = 3\nmax_steps = 400\n\n[collection]\nfarfield_pad = 256\n",
    )
    .unwrap();
    cfg
}

#[test]
fn simulate_smoke_produces_the_full_output_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let manifest_path = fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .find(|p| p.to_string_lossy().ends_with(".manifest.json"))
        .expect("manifest written");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 9, "spectra, far field, metrics, plane");
    for name in outputs {
        assert!(
            out_dir.join(name.as_str().unwrap()).exists(),
            "missing listed output {name}"
        );
    }
    assert_eq!(manifest["steps"].as_u64(), Some(400));
    assert_eq!(manifest["not_decayed"].as_bool(), Some(true));

    // Three wavelengths cannot host the resonance extractor; the metrics
    // file must say so rather than invent numbers.
    let metrics_name = outputs
        .iter()
        .find(|n| n.as_str().unwrap().ends_with(".metrics.json"))
        .unwrap();
    let metrics: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out_dir.join(metrics_name.as_str().unwrap())).unwrap(),
    )
    .unwrap();
    assert!(metrics["error"].is_string());
}

#[test]
fn simulate_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path());
    let mut spectra: Vec<Vec<u8>> = Vec::new();
    let mut planes: Vec<Vec<u8>> = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        let grab = |suffix: &str| -> Vec<u8> {
            let p = fs::read_dir(&out_dir)
                .unwrap()
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .find(|p| p.to_string_lossy().ends_with(suffix))
                .unwrap_or_else(|| panic!("no {suffix} in {}", out_dir.display()));
            fs::read(p).unwrap()
        };
        spectra.push(grab(".f_p.csv"));
        planes.push(grab(".plane.bin"));
    }
    assert_eq!(spectra[0], spectra[1], "spectra differ between reruns");
    assert_eq!(planes[0], planes[1], "plane records differ between reruns");
}

#[test]
fn sweep_smoke_builds_an_idempotent_table() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("na_plan.toml");
    fs::write(
        &plan,
        "[sweep]\naxis = \"NA\"\nvalues = [0.5, 0.7]\n\n[device]\nN_rings = 0\n\n[run]\nresolution_nm = 100.0\nn_lambda = 3\nmax_steps = 200\n\n[collection]\nfarfield_pad = 256\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "sweep",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];

    let first = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr_of(&first));
    let csv_path = out_dir.join("na_plan.csv");
    let first_bytes = fs::read(&csv_path).unwrap();
    let text = String::from_utf8_lossy(&first_bytes).into_owned();
    assert_eq!(text.lines().count(), 3, "header plus one row per value");
    // Three wavelengths cannot produce metrics; both rows carry the error.
    assert!(text.contains("at least 50 required"));

    let second = run(&args);
    assert_eq!(second.status.code(), Some(0), "{}", stderr_of(&second));
    assert_eq!(fs::read(&csv_path).unwrap(), first_bytes);
    assert_eq!(
        stderr_of(&second).matches("fresh").count(),
        0,
        "no rows should rerun"
    );
}
