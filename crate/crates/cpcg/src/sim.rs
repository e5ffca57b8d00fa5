//! One complete emitter simulation: build the domain, drive the dipole,
//! step until the stored energy has decayed, and reduce the monitor records
//! to the cavity figures of merit.
//!
//! Two entry points share the same time loop: [`run_device`] builds the
//! layered grating device around the emitter, and [`run_uniform`] embeds the
//! same emitter in an unbounded uniform medium. The uniform path exists for
//! calibration — the radiated power of a dipole in vacuum or bulk material
//! has a closed form, so it pins the absolute power normalization that every
//! Purcell and efficiency figure relies on.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::constants::PML_CELLS;
use crate::engine::checkpoint::{self, CheckpointError, MonitorState};
use crate::engine::monitor::{
    wavelength_axis, BoxDft, FaceDft, FaceNormal, PlaneRecord, SourceSpectrum,
};
use crate::engine::source::{dipole_taps, GaussianPulse};
use crate::engine::Engine;
use crate::geometry::{voxelize, DeviceSpec, GeometryError, GridLayout, MaterialMap};
use crate::power::{extraction_efficiency, purcell_spectrum, PowerSpectrum, Spectrum};

/// The emitting dot: an in-plane electric dipole at the membrane mid-height,
/// displaced laterally from the device axis by (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec {
    pub x_nm: f64,
    pub y_nm: f64,
    /// Offset from the membrane mid-height; kept at zero in all studies.
    pub z_nm: f64,
    /// In-plane orientation, degrees from the x axis.
    pub theta_deg: f64,
}

impl Default for DipoleSpec {
    fn default() -> Self {
        DipoleSpec {
            x_nm: 0.0,
            y_nm: 0.0,
            z_nm: 0.0,
            theta_deg: 0.0,
        }
    }
}

impl DipoleSpec {
    pub fn direction(&self) -> [f64; 3] {
        let t = self.theta_deg.to_radians();
        [t.cos(), t.sin(), 0.0]
    }
}

/// Numerical controls of a run. `new` fills the standard values; tests and
/// sweeps override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub delta_nm: f64,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub n_lambda: usize,
    /// Stop when interior energy falls below this fraction of its peak.
    pub decay_threshold: f64,
    pub max_steps: u64,
    /// Steps between energy and health checks.
    pub check_interval: u64,
    /// Half-size of the dipole flux box, cells.
    pub flux_halfcells: usize,
    /// Optional second, larger flux box for conservation cross-checks.
    pub outer_flux_halfcells: Option<usize>,
    /// Monitor-plane height above the membrane top (or above the dipole in
    /// a uniform run), cells.
    pub plane_lift_cells: usize,
    /// Multiplier on the default pulse envelope width. Results must not
    /// depend on it; the calibration suite checks that they don't.
    pub pulse_sigma_scale: f64,
    /// Write a restartable snapshot every this many steps (0 = never).
    pub checkpoint_every: u64,
    pub checkpoint_path: Option<PathBuf>,
    /// Restore from `checkpoint_path` when the file exists.
    pub resume: bool,
}

impl RunSettings {
    pub fn new(delta_nm: f64) -> Self {
        RunSettings {
            delta_nm,
            lambda_min_nm: 1450.0,
            lambda_max_nm: 1650.0,
            n_lambda: 201,
            decay_threshold: 1e-7,
            max_steps: 200_000,
            check_interval: 100,
            flux_halfcells: 4,
            outer_flux_halfcells: None,
            plane_lift_cells: 2,
            pulse_sigma_scale: 1.0,
            checkpoint_every: 0,
            checkpoint_path: None,
            resume: false,
        }
    }
}

#[derive(Debug)]
pub enum SimError {
    Geometry(GeometryError),
    /// A monitor landed inside the absorbing boundary or off the grid.
    Monitor(String),
    /// Fields went non-finite: the run is unstable and was aborted.
    NonFinite { step: u64 },
    Checkpoint(CheckpointError),
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::Geometry(e) => write!(f, "geometry error: {e}"),
            SimError::Monitor(s) => write!(f, "monitor placement error: {s}"),
            SimError::NonFinite { step } => {
                write!(f, "non-finite fields at step {step}; run aborted")
            }
            SimError::Checkpoint(e) => write!(f, "checkpoint error: {e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<GeometryError> for SimError {
    fn from(e: GeometryError) -> Self {
        SimError::Geometry(e)
    }
}

impl From<CheckpointError> for SimError {
    fn from(e: CheckpointError) -> Self {
        SimError::Checkpoint(e)
    }
}

/// Everything a completed run produces. Powers are per unit dipole current
/// moment squared; ratios are dimensionless.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub lambdas_nm: Vec<f64>,
    /// Net outward flux through the dipole box.
    pub p_rad: PowerSpectrum,
    /// Same, through the outer box when one was requested.
    pub p_rad_outer: Option<PowerSpectrum>,
    /// Upward flux through the collection plane.
    pub p_up: PowerSpectrum,
    pub f_p: Spectrum,
    pub eta_ext: Spectrum,
    /// The collection-plane record, ready for far-field and fiber work.
    pub plane: PlaneRecord,
    pub not_decayed: bool,
    pub steps: u64,
    pub cells: (usize, usize, usize),
}

struct Monitors {
    source: SourceSpectrum,
    flux: BoxDft,
    outer: Option<BoxDft>,
    plane: FaceDft,
}

/// Box bounds around a cell, clipped nowhere: the caller validates.
fn box_bounds(center: (usize, usize, usize), half: usize) -> (usize, usize, usize, usize, usize, usize) {
    let (ic, jc, kc) = center;
    (
        ic.saturating_sub(half),
        ic + half,
        jc.saturating_sub(half),
        jc + half,
        kc.saturating_sub(half),
        kc + half,
    )
}

fn check_box_clear_of_pml(
    bounds: (usize, usize, usize, usize, usize, usize),
    cells: (usize, usize, usize),
    pml: [usize; 6],
    what: &str,
) -> Result<(), SimError> {
    let (i0, i1, j0, j1, k0, k1) = bounds;
    let (ncx, ncy, ncz) = cells;
    let ok = i0 > pml[0]
        && i1 < ncx - pml[1]
        && j0 > pml[2]
        && j1 < ncy - pml[3]
        && k0 > pml[4]
        && k1 < ncz - pml[5]
        && k0 >= 1;
    if ok {
        Ok(())
    } else {
        Err(SimError::Monitor(format!(
            "{what} face range x {i0}..{i1}, y {j0}..{j1}, z {k0}..{k1} \
             reaches into the absorbing boundary (grid {ncx}x{ncy}x{ncz}, pml {pml:?})"
        )))
    }
}

/// The shared time loop: inject, step, accumulate, checkpoint, stop on
/// decay. Returns (steps done, not-decayed flag).
fn drive(
    eng: &mut Engine,
    pulse: &GaussianPulse,
    mon: &mut Monitors,
    settings: &RunSettings,
) -> Result<(u64, bool), SimError> {
    let dt = eng.dt();
    let check = settings.check_interval.max(1);
    let mut peak_energy = 0.0f64;
    let mut decayed = false;
    while eng.steps_done() < settings.max_steps {
        let t_half = eng.time() + 0.5 * dt;
        let current = pulse.current(t_half);
        eng.step(current);
        mon.source.accumulate(current, eng.time(), dt);
        mon.flux.accumulate(eng);
        if let Some(outer) = mon.outer.as_mut() {
            outer.accumulate(eng);
        }
        mon.plane.accumulate(eng);

        let n = eng.steps_done();
        if n % check == 0 {
            if eng.has_nonfinite() {
                return Err(SimError::NonFinite { step: n });
            }
            let e = eng.interior_energy();
            peak_energy = peak_energy.max(e);
            if eng.time() > pulse.end_time()
                && peak_energy > 0.0
                && e <= settings.decay_threshold * peak_energy
            {
                decayed = true;
            }
        }
        if settings.checkpoint_every > 0 && n % settings.checkpoint_every == 0 {
            if let Some(path) = &settings.checkpoint_path {
                checkpoint::save(path, eng, &mon.source, &mon.flux, &mon.plane)?;
            }
        }
        if decayed {
            break;
        }
    }
    Ok((eng.steps_done(), !decayed))
}

fn finalize(
    eng: &Engine,
    mut mon: Monitors,
    lambdas: Vec<f64>,
    plane_geom: (f64, f64, f64),
    steps: u64,
    not_decayed: bool,
) -> RunOutput {
    let delta = eng.delta();
    if steps > 0 {
        mon.flux.normalize(&mon.source);
        if let Some(outer) = mon.outer.as_mut() {
            outer.normalize(&mon.source);
        }
        mon.plane.normalize(&mon.source);
    }
    let p_rad = mon.flux.net_outward_power(delta);
    let p_rad_outer = mon.outer.as_ref().map(|b| b.net_outward_power(delta));
    let (x0_m, y0_m, z_above_ref_m) = plane_geom;
    let mut plane = PlaneRecord::from_face(&mon.plane, delta, x0_m, y0_m, z_above_ref_m);
    plane.not_decayed = not_decayed;
    let p_up = plane.upward_flux();
    let f_p = purcell_spectrum(&p_rad, crate::geometry::DeviceSpec::default().n_inp);
    let eta_ext = extraction_efficiency(&p_up, &p_rad);
    RunOutput {
        lambdas_nm: lambdas,
        p_rad,
        p_rad_outer,
        p_up,
        f_p,
        eta_ext,
        plane,
        not_decayed,
        steps,
        cells: eng.cell_counts(),
    }
}

fn build_monitors(
    eng: &Engine,
    lambdas: &[f64],
    dipole_cell: (usize, usize, usize),
    plane_node: usize,
    settings: &RunSettings,
) -> Result<Monitors, SimError> {
    let cells = eng.cell_counts();
    let pml = eng.pml();

    let inner = box_bounds(dipole_cell, settings.flux_halfcells);
    check_box_clear_of_pml(inner, cells, pml, "dipole flux box")?;
    let (i0, i1, j0, j1, k0, k1) = inner;
    let flux = BoxDft::new(i0, i1, j0, j1, k0, k1, lambdas);

    let outer = match settings.outer_flux_halfcells {
        Some(half) => {
            let b = box_bounds(dipole_cell, half);
            check_box_clear_of_pml(b, cells, pml, "outer flux box")?;
            let (i0, i1, j0, j1, k0, k1) = b;
            Some(BoxDft::new(i0, i1, j0, j1, k0, k1, lambdas))
        }
        None => None,
    };
    if outer.is_some() && settings.checkpoint_every > 0 {
        return Err(SimError::Monitor(
            "checkpointing does not cover a second flux box; disable one of them".into(),
        ));
    }

    let (ncx, ncy, ncz) = cells;
    if plane_node + 1 >= ncz - pml[5] {
        return Err(SimError::Monitor(format!(
            "collection plane node {plane_node} reaches the top absorber \
             (ncz {ncz}, pml {})",
            pml[5]
        )));
    }
    let plane = FaceDft::new(
        FaceNormal::ZHi,
        plane_node,
        pml[0],
        ncx - pml[1],
        pml[2],
        ncy - pml[3],
        lambdas,
    );

    Ok(Monitors {
        source: SourceSpectrum::new(lambdas),
        flux,
        outer,
        plane,
    })
}

fn execute(
    mut eng: Engine,
    lambdas: Vec<f64>,
    dipole_cell: (usize, usize, usize),
    plane_node: usize,
    plane_center_m: (f64, f64),
    plane_ref_z_m: f64,
    settings: &RunSettings,
) -> Result<RunOutput, SimError> {
    let mut mon = build_monitors(&eng, &lambdas, dipole_cell, plane_node, settings)?;

    let mut pulse = GaussianPulse::for_band(
        crate::constants::DESIGN_WAVELENGTH_NM,
        settings.lambda_min_nm,
        settings.lambda_max_nm,
    );
    pulse.sigma_s *= settings.pulse_sigma_scale;

    if settings.resume {
        if let Some(path) = &settings.checkpoint_path {
            if path.exists() {
                checkpoint::restore(
                    path,
                    &mut eng,
                    MonitorState {
                        source: &mut mon.source,
                        flux_box: &mut mon.flux,
                        plane: &mut mon.plane,
                    },
                )?;
            }
        }
    }

    let (steps, not_decayed) = drive(&mut eng, &pulse, &mut mon, settings)?;

    let delta = eng.delta();
    let (cx_m, cy_m) = plane_center_m;
    let x0_m = (mon.plane.a0 as f64 + 0.5) * delta - cx_m;
    let y0_m = (mon.plane.b0 as f64 + 0.5) * delta - cy_m;
    let z_above = plane_node as f64 * delta - plane_ref_z_m;
    Ok(finalize(
        &eng,
        mon,
        lambdas,
        (x0_m, y0_m, z_above),
        steps,
        not_decayed,
    ))
}

/// Simulate the full device with the emitter inside it.
pub fn run_device(
    spec: &DeviceSpec,
    dipole: &DipoleSpec,
    settings: &RunSettings,
) -> Result<RunOutput, SimError> {
    spec.validate()?;
    let layout = GridLayout::for_device(spec, settings.delta_nm, PML_CELLS)?;
    let map = voxelize(spec, &layout)?;
    let mut eng = Engine::new(&map, layout.pml);
    let delta = eng.delta();

    let nm = 1e-9;
    let pos = [
        (layout.center_x_nm + dipole.x_nm) * nm,
        (layout.center_y_nm + dipole.y_nm) * nm,
        (layout.z_membrane_mid_nm() + dipole.z_nm) * nm,
    ];
    eng.set_taps(dipole_taps(eng.grid(), delta, pos, dipole.direction()));

    let lambdas = wavelength_axis(
        settings.lambda_min_nm,
        settings.lambda_max_nm,
        settings.n_lambda,
    );
    let dipole_cell = (
        (pos[0] / delta).round() as usize,
        (pos[1] / delta).round() as usize,
        (pos[2] / delta).round() as usize,
    );
    let plane_node =
        (layout.z_inp_top_nm / settings.delta_nm).ceil() as usize + settings.plane_lift_cells;
    execute(
        eng,
        lambdas,
        dipole_cell,
        plane_node,
        (layout.center_x_nm * nm, layout.center_y_nm * nm),
        layout.z_inp_top_nm * nm,
        settings,
    )
}

/// Simulate the same emitter in an unbounded uniform medium of relative
/// permittivity `eps_r`, on an `nc` cubed grid absorbing on all six faces.
/// This is the calibration geometry: its radiated power has a closed form.
pub fn run_uniform(
    nc: usize,
    eps_r: f64,
    dipole_dir: [f64; 3],
    settings: &RunSettings,
) -> Result<RunOutput, SimError> {
    let map = MaterialMap::uniform(nc, nc, nc, settings.delta_nm, eps_r);
    let mut eng = Engine::new(&map, [PML_CELLS; 6]);
    let delta = eng.delta();

    let mid = nc / 2;
    // On the Ex edge center for an x dipole: a single-tap, exactly
    // symmetric placement.
    let pos = [
        (mid as f64 + 0.5) * delta,
        mid as f64 * delta,
        mid as f64 * delta,
    ];
    eng.set_taps(dipole_taps(eng.grid(), delta, pos, dipole_dir));

    let lambdas = wavelength_axis(
        settings.lambda_min_nm,
        settings.lambda_max_nm,
        settings.n_lambda,
    );
    let plane_node = mid + settings.plane_lift_cells;
    execute(
        eng,
        lambdas,
        (mid, mid, mid),
        plane_node,
        (pos[0], pos[1]),
        mid as f64 * delta,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::DESIGN_WAVELENGTH_NM;
    use crate::power::homogeneous_dipole_power;
    use std::sync::OnceLock;

    /// One shared vacuum run at 20 samples per wavelength: several tests
    /// read different aspects of it, and it is the most expensive fixture.
    fn vacuum_run() -> &'static RunOutput {
        static RUN: OnceLock<RunOutput> = OnceLock::new();
        RUN.get_or_init(|| {
            let mut s = RunSettings::new(DESIGN_WAVELENGTH_NM / 20.0);
            s.n_lambda = 11;
            s.outer_flux_halfcells = Some(7);
            run_uniform(40, 1.0, [1.0, 0.0, 0.0], &s).unwrap()
        })
    }

    #[test]
    fn vacuum_dipole_tracks_the_analytic_radiated_power() {
        let out = vacuum_run();
        assert!(!out.not_decayed, "vacuum run must decay quickly");
        for (l, p) in out.lambdas_nm.iter().zip(&out.p_rad.watts) {
            let expect = homogeneous_dipole_power(1.0, *l);
            let err = (p - expect).abs() / expect;
            assert!(
                err < 0.02,
                "radiated power at {l} nm off by {:.2}%",
                100.0 * err
            );
        }
    }

    #[test]
    fn concentric_flux_boxes_agree() {
        // Lossless medium between the boxes: identical net flux up to
        // interpolation error of the coarser sampling surfaces.
        let out = vacuum_run();
        let outer = out.p_rad_outer.as_ref().unwrap();
        for ((l, a), b) in out
            .lambdas_nm
            .iter()
            .zip(&out.p_rad.watts)
            .zip(&outer.watts)
        {
            let err = (a - b).abs() / a.abs().max(1e-300);
            assert!(err < 0.005, "boxes disagree by {:.3}% at {l} nm", 100.0 * err);
        }
    }

    #[test]
    fn vacuum_extraction_is_near_half_by_symmetry() {
        // The plane catches the upper hemisphere minus a sliver of grazing
        // angles set by its finite footprint; expect slightly below 1/2.
        let out = vacuum_run();
        for (l, v) in out.lambdas_nm.iter().zip(&out.eta_ext.values) {
            assert!(
                (0.38..0.52).contains(v),
                "eta_ext at {l} nm is {v:.3}, expected near 0.5"
            );
        }
    }

    #[test]
    fn purcell_spectrum_ignores_the_pulse_envelope() {
        // The current-spectrum normalization must cancel the drive shape.
        let mut s = RunSettings::new(DESIGN_WAVELENGTH_NM / 20.0);
        s.n_lambda = 5;
        let a = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s).unwrap();
        s.pulse_sigma_scale = 0.7;
        let b = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s).unwrap();
        for ((l, x), y) in a.lambdas_nm.iter().zip(&a.f_p.values).zip(&b.f_p.values) {
            let err = (x - y).abs() / x.abs().max(1e-300);
            assert!(
                err < 0.01,
                "envelope changed F_P at {l} nm by {:.2}%",
                100.0 * err
            );
        }
    }

    #[test]
    fn flux_box_must_clear_the_absorber() {
        let mut s = RunSettings::new(DESIGN_WAVELENGTH_NM / 20.0);
        s.flux_halfcells = 50;
        let err = run_uniform(40, 1.0, [1.0, 0.0, 0.0], &s).unwrap_err();
        assert!(matches!(err, SimError::Monitor(_)), "got {err:?}");
    }

    #[test]
    fn zero_step_budget_returns_flagged_and_silent() {
        let mut s = RunSettings::new(DESIGN_WAVELENGTH_NM / 20.0);
        s.max_steps = 0;
        s.n_lambda = 3;
        let out = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s).unwrap();
        assert!(out.not_decayed);
        assert_eq!(out.steps, 0);
        assert!(out.p_rad.watts.iter().all(|&p| p == 0.0));
        assert!(out.plane.not_decayed);
    }

    #[test]
    fn checkpointed_run_resumes_to_the_same_spectra() {
        let dir = tempfile::tempdir().unwrap();
        let snap = dir.path().join("run.snap");

        let mut s = RunSettings::new(DESIGN_WAVELENGTH_NM / 20.0);
        s.n_lambda = 3;

        // Uninterrupted reference.
        let full = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s).unwrap();

        // Interrupted at a snapshot boundary past the pulse peak...
        let mut s1 = s.clone();
        s1.checkpoint_every = 2500;
        s1.checkpoint_path = Some(snap.clone());
        s1.max_steps = 2500;
        let part = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s1).unwrap();
        assert!(part.not_decayed);

        // ... and resumed to completion.
        let mut s2 = s.clone();
        s2.checkpoint_path = Some(snap);
        s2.resume = true;
        let resumed = run_uniform(36, 1.0, [1.0, 0.0, 0.0], &s2).unwrap();
        assert!(!resumed.not_decayed);
        assert!(resumed.steps > 2500);

        for (a, b) in full.p_rad.watts.iter().zip(&resumed.p_rad.watts) {
            let err = (a - b).abs() / a.abs().max(1e-300);
            assert!(err < 1e-6, "resumed power differs by {err:.2e}");
        }
        for (a, b) in full.eta_ext.values.iter().zip(&resumed.eta_ext.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
