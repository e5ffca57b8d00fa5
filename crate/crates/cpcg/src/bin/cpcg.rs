//! Command-line front end: single-device simulations, parameter sweeps,
//! far-field and fiber-coupling post-processing, geometry inspection, and
//! the physics self-check suite.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (simulation, I/O,
//! failed oracles), 2 on a config or usage error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cpcg::config;
use cpcg::engine::monitor::PlaneRecord;
use cpcg::farfield::{
    combine_orthogonal_dipoles, near_to_far, objective_fraction, FarField, FarFieldOptions,
};
use cpcg::fiber::{
    mode_coupling_efficiency, optimal_height, parse_fiber_table, AngularSpectrum, FiberSpec,
};
use cpcg::geometry::{generate_hole_layout, min_azimuthal_gap_nm};
use cpcg::output::{
    facet_csv, farfield_csv, load_plane_record, parse_spectrum_csv, power_csv, save_plane_record,
    spectrum_csv, write_atomic, RunManifest,
};
use cpcg::power::Spectrum;
use cpcg::report::{check_displacement, point_metrics, sweep_runner, ReportOptions};
use cpcg::sim::{run_device, RunOutput, RunSettings};
use cpcg::sweep::{find_resonance, run_sweep, SweepError, SweepTable};
use cpcg::validate::{format_report, run_oracles};

#[derive(Parser)]
#[command(
    name = "cpcg",
    version,
    about = "Circular photonic crystal grating cavity toolkit",
    long_about = "Simulate circular photonic crystal grating cavities, sweep their \
parameters, and reduce the results to Purcell spectra, far-field patterns, and \
fiber-coupling efficiencies."
)]
struct Cli {
    /// Worker threads for the field updates (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one device simulation; write spectra, the far field, and the
    /// collection-plane record.
    Simulate(SimulateArgs),
    /// Run a parameter sweep from a plan file into a crash-safe table.
    Sweep(SweepArgs),
    /// Fiber mode-coupling efficiency from a saved collection plane.
    Fibercouple(FibercoupleArgs),
    /// Far-field pattern from a saved collection plane.
    Farfield(FarfieldArgs),
    /// Print the hole layout of a device description.
    Geometry(GeometryArgs),
    /// Run the physics oracle suite against known closed forms.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Device and run description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the grid resolution from the config.
    #[arg(long)]
    resolution_nm: Option<f64>,
    /// Override the step budget from the config.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Pick up from this run's checkpoint if one exists.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan (TOML): the varied axis plus the base run.
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for the table, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the grid resolution from the plan.
    #[arg(long)]
    resolution_nm: Option<f64>,
    /// Override the step budget from the plan.
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct FibercoupleArgs {
    /// Saved collection-plane record (.plane.bin).
    #[arg(long)]
    monitor: PathBuf,
    /// Fiber name: a preset (SMF-28, 980-HP) or an entry in --fiber-table.
    #[arg(long)]
    fiber: String,
    /// CSV fiber table (name,MFD_um) replacing the presets.
    #[arg(long)]
    fiber_table: Option<PathBuf>,
    /// Evaluate at this facet height above the membrane, micrometers.
    #[arg(long, conflicts_with = "optimize_h")]
    height_um: Option<f64>,
    /// Search for the best facet height (the default mode).
    #[arg(long)]
    optimize_h: bool,
    /// Wavelength to evaluate; default: the strongest upward flux.
    #[arg(long)]
    lambda_nm: Option<f64>,
    /// Upper end of the height search, micrometers.
    #[arg(long, default_value_t = 20.0)]
    h_max_um: f64,
    /// Minimum FFT padding for the angular decomposition.
    #[arg(long, default_value_t = 1024)]
    pad: usize,
    /// Extraction-efficiency CSV; folds the source efficiency into an
    /// end-to-end fiber number at the evaluated wavelength.
    #[arg(long)]
    eta_ext: Option<PathBuf>,
    /// Write the propagated facet field here (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FarfieldArgs {
    /// Saved collection-plane record (.plane.bin).
    #[arg(long)]
    monitor: PathBuf,
    /// Second record from the orthogonal dipole; combines both into the
    /// pattern of a circularly polarized emitter.
    #[arg(long)]
    monitor_y: Option<PathBuf>,
    /// Wavelength to evaluate; default: the strongest upward flux.
    #[arg(long)]
    lambda_nm: Option<f64>,
    /// Objective NA for the printed collection fraction.
    #[arg(long, default_value_t = 0.7)]
    na: f64,
    /// Minimum FFT padding for the transform.
    #[arg(long, default_value_t = 1024)]
    pad: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeometryArgs {
    /// Config whose [device] section to inspect; defaults to the reference
    /// design when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the hole table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Fast subset (well under five minutes): skips the absorber echo test.
    #[arg(long)]
    quick: bool,
    /// Scale the analytic dipole-power reference. A deliberate fault here
    /// must trip exactly the power oracle — a self-test of the harness.
    #[arg(long, default_value_t = 1.0)]
    p_hom_scale: f64,
}

/// Failed commands distinguish bad input (exit 2) from a run that went
/// wrong (exit 1).
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn runtime(msg: impl Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        // rayon interprets zero as "pick for me"; forward it unchanged.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Fibercouple(a) => cmd_fibercouple(a),
        Cmd::Farfield(a) => cmd_farfield(a),
        Cmd::Geometry(a) => cmd_geometry(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------- helpers

fn read_config(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", path.display())))
}

fn load_plane(path: &Path) -> Result<PlaneRecord, Failure> {
    if !path.exists() {
        return Err(usage(format!("no such monitor file: {}", path.display())));
    }
    load_plane_record(path).map_err(|e| runtime(format!("cannot load {}: {e}", path.display())))
}

fn nearest_index(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, &v) in axis.iter().enumerate() {
        let d = (v - x).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Upward Poynting flux through a stored plane at one wavelength. Only
/// relative values matter here (wavelength selection), so no area factor.
fn plane_upward_flux(rec: &PlaneRecord, il: usize) -> f64 {
    let npts = rec.nx * rec.ny;
    let s = il * npts;
    let mut sum = 0.0;
    for p in 0..npts {
        let ex = rec.ex[s + p];
        let ey = rec.ey[s + p];
        let hx = rec.hx[s + p];
        let hy = rec.hy[s + p];
        sum += (ex * hy.conj() - ey * hx.conj()).re;
    }
    0.5 * sum
}

/// Pick the wavelength index to post-process: the requested one, or the
/// strongest upward flux when none is given.
fn choose_lambda(rec: &PlaneRecord, requested_nm: Option<f64>) -> (usize, f64) {
    let il = match requested_nm {
        Some(l) => nearest_index(&rec.lambdas_nm, l),
        None => {
            let mut best = 0;
            let mut top = f64::NEG_INFINITY;
            for il in 0..rec.lambdas_nm.len() {
                let f = plane_upward_flux(rec, il);
                if f > top {
                    top = f;
                    best = il;
                }
            }
            best
        }
    };
    (il, rec.lambdas_nm[il])
}

// --------------------------------------------------------------- simulate

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let text = read_config(&a.config)?;
    let cfg = config::parse_simulate(&text).map_err(Failure::Usage)?;
    let spec = cfg.device.to_spec();
    let dipole = cfg.dipole.to_spec();
    let mut settings = cfg.run.to_settings();
    if let Some(r) = a.resolution_nm {
        settings.delta_nm = r;
    }
    if let Some(m) = a.max_steps {
        settings.max_steps = m;
    }
    let opts = cfg.collection.to_report_options().map_err(Failure::Usage)?;

    fs::create_dir_all(&a.out)
        .map_err(|e| runtime(format!("cannot create {}: {e}", a.out.display())))?;
    let run_id = RunManifest::run_id_for(&a.config, text.as_bytes());
    if settings.checkpoint_every > 0 || a.resume {
        settings.checkpoint_path = Some(a.out.join(format!("{run_id}.snap")));
        settings.resume = a.resume;
    }

    eprintln!(
        "[simulate] {run_id}: {:.1} nm grid, {} wavelengths {:.1}-{:.1} nm",
        settings.delta_nm, settings.n_lambda, settings.lambda_min_nm, settings.lambda_max_nm
    );
    let t0 = Instant::now();
    let out = run_device(&spec, &dipole, &settings).map_err(|e| runtime(e))?;
    let wall = t0.elapsed().as_secs_f64();
    eprintln!(
        "[simulate] {} cells, {} steps in {:.1} s{}",
        out.cells.0 * out.cells.1 * out.cells.2,
        out.steps,
        wall,
        if out.not_decayed {
            " (step budget hit before full decay)"
        } else {
            ""
        }
    );

    write_simulate_outputs(&a.out, &run_id, &text, &settings, &opts, &out, wall)
}

fn write_simulate_outputs(
    dir: &Path,
    run_id: &str,
    config_text: &str,
    settings: &RunSettings,
    opts: &ReportOptions,
    out: &RunOutput,
    wall_seconds: f64,
) -> CmdResult {
    let mut outputs: Vec<String> = Vec::new();
    let mut save = |name: String, content: &[u8]| -> Result<(), Failure> {
        write_atomic(&dir.join(&name), content)
            .map_err(|e| runtime(format!("cannot write {name}: {e}")))?;
        outputs.push(name);
        Ok(())
    };

    save(
        format!("{run_id}.f_p.csv"),
        spectrum_csv("F_P", &out.f_p).as_bytes(),
    )?;
    save(
        format!("{run_id}.eta_ext.csv"),
        spectrum_csv("eta_ext", &out.eta_ext).as_bytes(),
    )?;
    save(
        format!("{run_id}.p_rad.csv"),
        power_csv("p_rad_W", &out.p_rad).as_bytes(),
    )?;
    save(
        format!("{run_id}.p_up.csv"),
        power_csv("p_up_W", &out.p_up).as_bytes(),
    )?;
    if let Some(outer) = &out.p_rad_outer {
        save(
            format!("{run_id}.p_rad_outer.csv"),
            power_csv("p_rad_outer_W", outer).as_bytes(),
        )?;
    }

    // Per-wavelength objective collection. Wavelengths with essentially no
    // upward flux would hand the transform pure monitor noise; report zero
    // there instead.
    let p_up_top = out.p_up.watts.iter().cloned().fold(0.0_f64, f64::max);
    let mut eta_obj = Vec::with_capacity(out.lambdas_nm.len());
    for il in 0..out.lambdas_nm.len() {
        let frac = if out.p_up.watts[il] > 1e-9 * p_up_top {
            let ff = near_to_far(&out.plane, il, &opts.farfield);
            objective_fraction(&ff, opts.na)
        } else {
            0.0
        };
        eta_obj.push(frac);
    }
    let eta_coll: Vec<f64> = eta_obj
        .iter()
        .zip(&out.eta_ext.values)
        .map(|(o, e)| o * e)
        .collect();
    save(
        format!("{run_id}.eta_obj.csv"),
        spectrum_csv(
            "eta_obj",
            &Spectrum::new(out.lambdas_nm.clone(), eta_obj),
        )
        .as_bytes(),
    )?;
    save(
        format!("{run_id}.eta_coll.csv"),
        spectrum_csv(
            "eta_coll",
            &Spectrum::new(out.lambdas_nm.clone(), eta_coll),
        )
        .as_bytes(),
    )?;

    // Far field at the cavity resonance; fall back to the band center when
    // the spectrum has no usable peak.
    let il_ff = match find_resonance(&out.f_p) {
        Ok(res) => nearest_index(&out.lambdas_nm, res.lambda_nm),
        Err(e) => {
            eprintln!("[simulate] no resonance peak ({e}); far field written at the band center");
            out.lambdas_nm.len() / 2
        }
    };
    let ff = near_to_far(&out.plane, il_ff, &opts.farfield);
    save(format!("{run_id}.farfield.csv"), farfield_csv(&ff).as_bytes())?;

    let metrics_json = match point_metrics(out, opts) {
        Ok(m) => serde_json::to_string_pretty(&m).expect("metrics serialize"),
        Err(e) => {
            eprintln!("[simulate] metrics not extracted: {e}");
            serde_json::to_string_pretty(&serde_json::json!({ "error": e }))
                .expect("error serializes")
        }
    };
    save(format!("{run_id}.metrics.json"), metrics_json.as_bytes())?;

    let plane_name = format!("{run_id}.plane.bin");
    save_plane_record(&dir.join(&plane_name), &out.plane)
        .map_err(|e| runtime(format!("cannot write {plane_name}: {e}")))?;
    outputs.push(plane_name);

    let manifest = RunManifest {
        run_id: run_id.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_snapshot: config_text.to_string(),
        grid_cells: [out.cells.0, out.cells.1, out.cells.2],
        resolution_nm: settings.delta_nm,
        steps: out.steps,
        wall_seconds,
        not_decayed: out.not_decayed,
        outputs,
    };
    let path = manifest
        .write(dir)
        .map_err(|e| runtime(format!("cannot write manifest: {e}")))?;
    eprintln!("[simulate] wrote {}", path.display());
    Ok(())
}

// ------------------------------------------------------------------ sweep

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let text = read_config(&a.plan)?;
    let plan = config::parse_sweep_plan(&text).map_err(Failure::Usage)?;
    let axis = plan.axis().map_err(Failure::Usage)?;
    let values = plan.values().map_err(Failure::Usage)?;
    let spec = plan.device.to_spec();
    let dipole = plan.dipole.to_spec();
    let mut settings = plan.run.to_settings();
    if let Some(r) = a.resolution_nm {
        settings.delta_nm = r;
    }
    if let Some(m) = a.max_steps {
        settings.max_steps = m;
    }
    let opts = plan.collection.to_report_options().map_err(Failure::Usage)?;
    check_displacement(&spec, axis, &values).map_err(Failure::Usage)?;

    fs::create_dir_all(&a.out)
        .map_err(|e| runtime(format!("cannot create {}: {e}", a.out.display())))?;
    let stem = a
        .plan
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sweep");
    let table = SweepTable::new(&a.out, stem);

    let total = values.len();
    let mut inner = sweep_runner(axis, &spec, &dipole, &settings, &opts);
    let mut done = 0usize;
    let runner = |v: f64| {
        done += 1;
        eprintln!("[sweep {axis}] value {v} ({done}/{total} fresh)");
        let r = inner(v);
        if let Err(e) = &r {
            eprintln!("[sweep {axis}] value {v} failed: {e}");
        }
        r
    };
    let rows = run_sweep(&values, &table, runner).map_err(|e| match e {
        SweepError::ResumeMismatch(m) => usage(m),
        other => runtime(other),
    })?;

    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "[sweep {axis}] {} rows ({failed} failed) -> {}",
        rows.len(),
        table.csv_path.display()
    );
    Ok(())
}

// ------------------------------------------------------------ fibercouple

fn cmd_fibercouple(a: &FibercoupleArgs) -> CmdResult {
    let fiber = resolve_fiber(&a.fiber, a.fiber_table.as_deref())?;
    let rec = load_plane(&a.monitor)?;
    let (il, lambda_nm) = choose_lambda(&rec, a.lambda_nm);
    if a.lambda_nm.is_none() {
        eprintln!("[fibercouple] using {lambda_nm} nm (strongest upward flux)");
    }
    if rec.not_decayed {
        eprintln!("[fibercouple] note: the source run hit its step budget before full decay");
    }

    let spectrum = AngularSpectrum::from_plane(&rec, il, a.pad);
    let (h_m, eta_mc) = match a.height_um {
        Some(h_um) => {
            let h_m = h_um * 1e-6;
            let facet = spectrum.at_height(h_m);
            (h_m, mode_coupling_efficiency(&facet, &fiber).map_err(runtime)?)
        }
        None => {
            let best =
                optimal_height(&spectrum, &fiber, a.h_max_um * 1e-6).map_err(runtime)?;
            (best.h_m, best.eta_mc)
        }
    };

    println!("lambda_nm = {lambda_nm}");
    println!("fiber = {}", fiber.name);
    println!("h_um = {}", h_m * 1e6);
    println!("eta_mc = {eta_mc}");

    if let Some(path) = &a.eta_ext {
        let table_text = read_config(path)?;
        let eta = parse_spectrum_csv(&table_text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let ie = nearest_index(&eta.lambdas_nm, lambda_nm);
        let lo = eta.lambdas_nm.first().copied().unwrap_or(lambda_nm);
        let hi = eta.lambdas_nm.last().copied().unwrap_or(lambda_nm);
        if lambda_nm < lo.min(hi) || lambda_nm > lo.max(hi) {
            eprintln!(
                "[fibercouple] warning: {lambda_nm} nm lies outside the efficiency table ({lo}-{hi} nm)"
            );
        }
        let eta_ext = eta.values[ie];
        println!("eta_ext = {eta_ext}");
        println!("eta_fiber = {}", eta_ext * eta_mc);
    }

    if let Some(out) = &a.out {
        let facet = spectrum.at_height(h_m);
        write_atomic(out, facet_csv(&facet).as_bytes())
            .map_err(|e| runtime(format!("cannot write {}: {e}", out.display())))?;
        eprintln!("[fibercouple] wrote {}", out.display());
    }
    Ok(())
}

fn resolve_fiber(name: &str, table: Option<&Path>) -> Result<FiberSpec, Failure> {
    match table {
        Some(path) => {
            let text = read_config(path)?;
            let fibers =
                parse_fiber_table(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            fibers.iter().find(|f| f.name == name).cloned().ok_or_else(|| {
                let names: Vec<&str> = fibers.iter().map(|f| f.name.as_str()).collect();
                usage(format!(
                    "fiber {name:?} is not in {} (has: {})",
                    path.display(),
                    names.join(", ")
                ))
            })
        }
        None => FiberSpec::preset(name).ok_or_else(|| {
            usage(format!(
                "unknown fiber preset {name:?} (presets: SMF-28, 980-HP)"
            ))
        }),
    }
}

// --------------------------------------------------------------- farfield

fn cmd_farfield(a: &FarfieldArgs) -> CmdResult {
    if !(a.na > 0.0 && a.na <= 1.0) {
        return Err(usage(format!("NA must be in (0, 1], got {}", a.na)));
    }
    let rec = load_plane(&a.monitor)?;
    let (il, lambda_nm) = choose_lambda(&rec, a.lambda_nm);
    if a.lambda_nm.is_none() {
        eprintln!("[farfield] using {lambda_nm} nm (strongest upward flux)");
    }
    let opts = FarFieldOptions {
        pad_min: a.pad,
        ..FarFieldOptions::default()
    };
    let ff_x = near_to_far(&rec, il, &opts);
    let ff: FarField = match &a.monitor_y {
        Some(path) => {
            let rec_y = load_plane(path)?;
            if rec_y.lambdas_nm != rec.lambdas_nm {
                return Err(usage(
                    "the two monitors were recorded on different wavelength axes",
                ));
            }
            let ff_y = near_to_far(&rec_y, il, &opts);
            combine_orthogonal_dipoles(&ff_x, &ff_y).map_err(usage)?
        }
        None => ff_x,
    };

    println!("lambda_nm = {lambda_nm}");
    println!("eta_obj = {} (NA = {})", objective_fraction(&ff, a.na), a.na);
    write_atomic(&a.out, farfield_csv(&ff).as_bytes())
        .map_err(|e| runtime(format!("cannot write {}: {e}", a.out.display())))?;
    eprintln!("[farfield] wrote {}", a.out.display());
    Ok(())
}

// --------------------------------------------------------------- geometry

fn cmd_geometry(a: &GeometryArgs) -> CmdResult {
    let device = match &a.config {
        Some(path) => {
            let text = read_config(path)?;
            config::parse_device_only(&text).map_err(Failure::Usage)?
        }
        None => Default::default(),
    };
    let spec = device.to_spec();
    let layout = generate_hole_layout(&spec).map_err(|e| usage(e))?;

    let mut csv = String::from("ring,m,x_nm,y_nm,diameter_nm\n");
    for h in &layout.holes {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            h.ring, h.m, h.x_nm, h.y_nm, h.diameter_nm
        ));
    }
    match &a.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())
                .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        None => print!("{csv}"),
    }

    let summary = |line: String| match &a.out {
        Some(_) => println!("{line}"),
        None => eprintln!("{line}"),
    };
    summary(format!("holes = {}", layout.holes.len()));
    summary(format!("rings = {}", spec.n_rings));
    summary(format!("outer_extent_nm = {}", spec.outer_extent_nm()));
    if spec.n_rings >= 1 {
        summary(format!("ring1_gap_nm = {}", min_azimuthal_gap_nm(&spec, 1)));
    }
    Ok(())
}

// --------------------------------------------------------------- validate

fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    if !(a.p_hom_scale.is_finite() && a.p_hom_scale > 0.0) {
        return Err(usage("p-hom-scale must be a positive number"));
    }
    let t0 = Instant::now();
    let checks = run_oracles(a.quick, a.p_hom_scale);
    print!("{}", format_report(&checks));
    eprintln!("[validate] finished in {:.1} s", t0.elapsed().as_secs_f64());
    if checks.iter().all(|c| c.pass) {
        Ok(())
    } else {
        Err(runtime("the oracle suite reported failures"))
    }
}
