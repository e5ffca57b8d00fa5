//! Reduction of a completed run to the sweep-row metrics, and the glue that
//! turns a sweep plan into per-value runner closures.
//!
//! A row answers, for one parameter value: where is the resonance, how
//! strong and how wide is it, and how much of the emission survives each
//! stage of the collection chain (upward extraction, objective aperture,
//! fiber mode). Device axes re-simulate per value; the facet height and
//! aperture axes reuse one base simulation and only re-run post-processing.

use std::sync::OnceLock;

use crate::farfield::{near_to_far, objective_fraction, FarFieldOptions};
use crate::fiber::{mode_coupling_efficiency, optimal_height, AngularSpectrum, FiberSpec};
use crate::geometry::DeviceSpec;
use crate::sim::{run_device, DipoleSpec, RunOutput, RunSettings};
use crate::sweep::{bandwidth_above, find_resonance, PointMetrics, SweepAxis};

/// What to extract from each run.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Objective numerical aperture for the collection column.
    pub na: f64,
    /// Purcell level defining the bandwidth columns.
    pub purcell_threshold: f64,
    /// Fiber for the coupling columns; `None` leaves them empty.
    pub fiber: Option<FiberSpec>,
    /// Facet-height search window for the coupling optimum, micrometers.
    pub h_max_um: f64,
    /// Fixed facet height: evaluate there instead of optimizing.
    pub fiber_height_um: Option<f64>,
    pub farfield: FarFieldOptions,
    /// FFT padding for the fiber propagation step.
    pub pad_min: usize,
    /// Edge-field ratio above which the truncation flag is raised.
    pub truncation_flag_level: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            na: 0.7,
            purcell_threshold: 10.0,
            fiber: None,
            h_max_um: 20.0,
            fiber_height_um: None,
            farfield: FarFieldOptions::default(),
            pad_min: 1024,
            truncation_flag_level: 0.05,
        }
    }
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

/// Reduce one completed run to a sweep row. Resonance-extraction failures
/// (no peak in band, unresolved width) surface as errors so the sweep can
/// record them and continue.
pub fn point_metrics(out: &RunOutput, opts: &ReportOptions) -> Result<PointMetrics, String> {
    let res = find_resonance(&out.f_p).map_err(|e| e.to_string())?;
    let bw = bandwidth_above(&out.f_p, opts.purcell_threshold);
    let il = nearest_index(&out.lambdas_nm, res.lambda_nm);

    let eta_ext = out.eta_ext.values[il];
    let ff = near_to_far(&out.plane, il, &opts.farfield);
    let eta_obj = objective_fraction(&ff, opts.na);
    let eta_coll = eta_ext * eta_obj;

    let (eta_mc, eta_smf, h_opt_um) = match &opts.fiber {
        Some(fiber) => {
            let spectrum = AngularSpectrum::from_plane(&out.plane, il, opts.pad_min);
            let (h_m, eta) = match opts.fiber_height_um {
                Some(h_um) => {
                    let facet = spectrum.at_height(h_um * 1e-6);
                    (h_um * 1e-6, mode_coupling_efficiency(&facet, fiber)?)
                }
                None => {
                    let best = optimal_height(&spectrum, fiber, opts.h_max_um * 1e-6)?;
                    (best.h_m, best.eta_mc)
                }
            };
            (Some(eta), Some(eta_ext * eta), Some(h_m * 1e6))
        }
        None => (None, None, None),
    };

    Ok(PointMetrics {
        lambda_cav_nm: res.lambda_nm,
        f_p_peak: res.peak,
        q: res.q,
        w_fp10_nm: bw.primary_nm,
        w_fp10_total_nm: bw.total_nm,
        multi_interval: bw.multi_interval,
        eta_ext,
        eta_obj,
        eta_coll,
        eta_mc,
        eta_smf,
        h_opt_um,
        not_decayed: out.not_decayed,
        truncation: out.plane.edge_truncation_ratio(il) > opts.truncation_flag_level,
    })
}

/// Write the swept value into the device or dipole description. The two
/// post-processing axes are not device parameters and are rejected here.
pub fn apply_axis(
    spec: &mut DeviceSpec,
    dipole: &mut DipoleSpec,
    axis: SweepAxis,
    value: f64,
) -> Result<(), String> {
    match axis {
        SweepAxis::R => spec.radius_nm = value,
        SweepAxis::Pitch => spec.pitch_nm = value,
        SweepAxis::D => spec.hole_d_nm = value,
        SweepAxis::TSiO2 => spec.t_sio2_nm = value,
        SweepAxis::TInP => spec.t_inp_nm = value,
        SweepAxis::NRings => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(format!("N_rings must be a non-negative integer, got {value}"));
            }
            spec.n_rings = value as u32;
        }
        SweepAxis::DipoleX => dipole.x_nm = value,
        SweepAxis::DipoleY => dipole.y_nm = value,
        SweepAxis::Theta => dipole.theta_deg = value,
        SweepAxis::H | SweepAxis::Na => {
            return Err(format!(
                "axis {axis} is post-processing only and does not alter the device"
            ))
        }
    }
    Ok(())
}

/// Validate a dipole-displacement request against the device: the emitter
/// must stay within the central disk's inner half.
pub fn check_displacement(spec: &DeviceSpec, axis: SweepAxis, values: &[f64]) -> Result<(), String> {
    if !matches!(axis, SweepAxis::DipoleX | SweepAxis::DipoleY) {
        return Ok(());
    }
    let limit = 0.5 * spec.radius_nm;
    for &v in values {
        if v.abs() > limit {
            return Err(format!(
                "displacement {v} nm exceeds half the central disk radius ({limit} nm)"
            ));
        }
    }
    Ok(())
}

/// One full simulate-and-reduce cycle.
pub fn run_one(
    spec: &DeviceSpec,
    dipole: &DipoleSpec,
    settings: &RunSettings,
    opts: &ReportOptions,
) -> Result<PointMetrics, String> {
    let out = run_device(spec, dipole, settings).map_err(|e| e.to_string())?;
    point_metrics(&out, opts)
}

/// Build the per-value runner for a sweep. Device axes clone the base
/// description, apply the value, and simulate. The `h` and `NA` axes run
/// the base device once (lazily) and then vary only the post-processing.
pub fn sweep_runner<'a>(
    axis: SweepAxis,
    spec: &'a DeviceSpec,
    dipole: &'a DipoleSpec,
    settings: &'a RunSettings,
    opts: &'a ReportOptions,
) -> impl FnMut(f64) -> Result<PointMetrics, String> + 'a {
    let base: OnceLock<Result<RunOutput, String>> = OnceLock::new();
    move |value: f64| -> Result<PointMetrics, String> {
        if axis.is_postprocessing() {
            let out = base
                .get_or_init(|| run_device(spec, dipole, settings).map_err(|e| e.to_string()))
                .as_ref()
                .map_err(|e| e.clone())?;
            let mut o = opts.clone();
            match axis {
                SweepAxis::H => {
                    if o.fiber.is_none() {
                        return Err("the h axis needs a fiber in the plan".into());
                    }
                    o.fiber_height_um = Some(value);
                }
                SweepAxis::Na => o.na = value,
                _ => unreachable!(),
            }
            point_metrics(out, &o)
        } else {
            let mut s = spec.clone();
            let mut d = *dipole;
            apply_axis(&mut s, &mut d, axis, value)?;
            run_one(&s, &d, settings, opts)
        }
    }
}
