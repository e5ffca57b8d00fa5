//! TOML run configuration.
//!
//! Every physical key carries its unit as a suffix (`R_nm`, `h_um`); there
//! is no implicit unit inference anywhere. Unknown keys are schema errors,
//! not warnings — a typo like `radius_nm` must fail loudly rather than
//! silently simulate the default device.

use serde::{Deserialize, Serialize};

use crate::geometry::DeviceSpec;
use crate::sim::{DipoleSpec, RunSettings};
use crate::sweep::SweepAxis;

fn d_radius() -> f64 {
    760.0
}
fn d_pitch() -> f64 {
    630.0
}
fn d_hole() -> f64 {
    200.0
}
fn d_fold() -> u32 {
    12
}
fn d_rings() -> u32 {
    10
}
fn d_t_inp() -> f64 {
    300.0
}
fn d_t_sio2() -> f64 {
    610.0
}
fn d_t_mirror() -> f64 {
    100.0
}
fn d_n_inp() -> f64 {
    3.135
}
fn d_n_sio2() -> f64 {
    1.443
}

/// `[device]` section: the grating stack. Defaults are the optimized
/// telecom design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(rename = "R_nm", default = "d_radius")]
    pub r_nm: f64,
    #[serde(rename = "Lambda_nm", default = "d_pitch")]
    pub lambda_nm: f64,
    #[serde(rename = "D_nm", default = "d_hole")]
    pub d_nm: f64,
    #[serde(default = "d_fold")]
    pub n_fold: u32,
    #[serde(rename = "N_rings", default = "d_rings")]
    pub n_rings: u32,
    #[serde(rename = "t_InP_nm", default = "d_t_inp")]
    pub t_inp_nm: f64,
    #[serde(rename = "t_SiO2_nm", default = "d_t_sio2")]
    pub t_sio2_nm: f64,
    #[serde(rename = "t_mirror_nm", default = "d_t_mirror")]
    pub t_mirror_nm: f64,
    #[serde(rename = "n_InP", default = "d_n_inp")]
    pub n_inp: f64,
    #[serde(rename = "n_SiO2", default = "d_n_sio2")]
    pub n_sio2: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty device section uses defaults")
    }
}

impl DeviceConfig {
    pub fn to_spec(&self) -> DeviceSpec {
        DeviceSpec {
            radius_nm: self.r_nm,
            pitch_nm: self.lambda_nm,
            hole_d_nm: self.d_nm,
            n_fold: self.n_fold,
            n_rings: self.n_rings,
            t_inp_nm: self.t_inp_nm,
            t_sio2_nm: self.t_sio2_nm,
            t_mirror_nm: self.t_mirror_nm,
            n_inp: self.n_inp,
            n_sio2: self.n_sio2,
        }
    }
}

/// `[dipole]` section: emitter placement and orientation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleConfig {
    #[serde(default)]
    pub x_nm: f64,
    #[serde(default)]
    pub y_nm: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

impl DipoleConfig {
    pub fn to_spec(&self) -> DipoleSpec {
        DipoleSpec {
            x_nm: self.x_nm,
            y_nm: self.y_nm,
            z_nm: 0.0,
            theta_deg: self.theta_deg,
        }
    }
}

fn d_lambda_min() -> f64 {
    1450.0
}
fn d_lambda_max() -> f64 {
    1650.0
}
fn d_n_lambda() -> usize {
    201
}
fn d_decay() -> f64 {
    1e-7
}
fn d_max_steps() -> u64 {
    200_000
}

/// `[run]` section: numerical controls. Only the mesh pitch is mandatory —
/// it sets cost and accuracy, so it must be a conscious choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub resolution_nm: f64,
    #[serde(default = "d_lambda_min")]
    pub lambda_min_nm: f64,
    #[serde(default = "d_lambda_max")]
    pub lambda_max_nm: f64,
    #[serde(default = "d_n_lambda")]
    pub n_lambda: usize,
    #[serde(default = "d_decay")]
    pub decay_threshold: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub checkpoint_every: u64,
}

impl RunConfig {
    pub fn to_settings(&self) -> RunSettings {
        let mut s = RunSettings::new(self.resolution_nm);
        s.lambda_min_nm = self.lambda_min_nm;
        s.lambda_max_nm = self.lambda_max_nm;
        s.n_lambda = self.n_lambda;
        s.decay_threshold = self.decay_threshold;
        s.max_steps = self.max_steps;
        s.checkpoint_every = self.checkpoint_every;
        s
    }
}

fn d_na() -> f64 {
    0.7
}
fn d_h_max_um() -> f64 {
    20.0
}
fn d_threshold() -> f64 {
    10.0
}
fn d_pad() -> usize {
    1024
}

/// `[collection]` section: objective aperture and fiber-search window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionConfig {
    #[serde(rename = "NA", default = "d_na")]
    pub na: f64,
    #[serde(default = "d_h_max_um")]
    pub h_max_um: f64,
    /// Purcell threshold defining the reported bandwidth column.
    #[serde(default = "d_threshold")]
    pub purcell_threshold: f64,
    /// Fiber preset name for per-row coupling columns, when wanted.
    #[serde(default)]
    pub fiber: Option<String>,
    /// Minimum FFT padding for the far-field and facet transforms. The
    /// default resolves sub-degree angular structure; tiny smoke runs may
    /// lower it.
    #[serde(default = "d_pad")]
    pub farfield_pad: usize,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty collection section uses defaults")
    }
}

impl CollectionConfig {
    /// Resolve into the post-processing options, looking up the fiber
    /// preset when one is named.
    pub fn to_report_options(&self) -> Result<crate::report::ReportOptions, String> {
        if !(self.na > 0.0 && self.na <= 1.0) {
            return Err(format!("NA must be in (0, 1], got {}", self.na));
        }
        let fiber = match &self.fiber {
            Some(name) => Some(
                crate::fiber::FiberSpec::preset(name)
                    .ok_or_else(|| format!("unknown fiber preset {name:?}"))?,
            ),
            None => None,
        };
        let mut opts = crate::report::ReportOptions::default();
        opts.na = self.na;
        opts.purcell_threshold = self.purcell_threshold;
        opts.fiber = fiber;
        opts.h_max_um = self.h_max_um;
        opts.farfield.pad_min = self.farfield_pad;
        opts.pad_min = self.farfield_pad;
        Ok(opts)
    }
}

/// A complete simulate configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub device: DeviceConfig,
    #[serde(default)]
    pub dipole: DipoleConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub collection: CollectionConfig,
}

/// `[sweep]` section of a plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    /// Explicit value list. Device axes may omit it to get +-10% around
    /// the base value in 5 steps; all other axes require it.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Displacement-study shorthand for the dipole axes: scan 0..=`max_nm`
    /// in `step_nm` increments. Mutually exclusive with `values`.
    #[serde(default)]
    pub max_nm: Option<f64>,
    #[serde(default)]
    pub step_nm: Option<f64>,
}

/// A complete sweep plan file: the varied axis plus the base run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlanConfig {
    pub sweep: SweepSection,
    #[serde(default)]
    pub device: DeviceConfig,
    #[serde(default)]
    pub dipole: DipoleConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub collection: CollectionConfig,
}

impl SweepPlanConfig {
    pub fn axis(&self) -> Result<SweepAxis, String> {
        self.sweep.axis.parse()
    }

    /// The value list, defaulted for device axes when omitted.
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let axis = self.axis()?;
        if let Some(v) = &self.sweep.values {
            if self.sweep.max_nm.is_some() || self.sweep.step_nm.is_some() {
                return Err(
                    "give either explicit `values` or `max_nm`+`step_nm`, not both".into(),
                );
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err("sweep values must be finite".into());
            }
            return Ok(v.clone());
        }
        match (self.sweep.max_nm, self.sweep.step_nm) {
            (Some(max), Some(step)) => {
                if !matches!(axis, SweepAxis::DipoleX | SweepAxis::DipoleY) {
                    return Err(format!(
                        "`max_nm`/`step_nm` describe a displacement scan; axis {} needs \
                         an explicit `values` list",
                        axis
                    ));
                }
                return crate::sweep::displacement_values(max, step);
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err("`max_nm` and `step_nm` must be given together".into());
            }
            (None, None) => {}
        }
        let base = match axis {
            SweepAxis::R => self.device.r_nm,
            SweepAxis::Pitch => self.device.lambda_nm,
            SweepAxis::D => self.device.d_nm,
            SweepAxis::TSiO2 => self.device.t_sio2_nm,
            SweepAxis::TInP => self.device.t_inp_nm,
            SweepAxis::NRings => self.device.n_rings as f64,
            _ => {
                return Err(format!(
                    "sweep axis {} has no base value to scale; list `values` explicitly",
                    axis
                ))
            }
        };
        let mut values: Vec<f64> = (0..5)
            .map(|i| base * (0.9 + 0.05 * i as f64))
            .collect();
        if matches!(axis, SweepAxis::NRings) {
            values = values.iter().map(|v| v.round()).collect();
            values.dedup();
        }
        Ok(values)
    }
}

pub fn parse_simulate(text: &str) -> Result<SimulateConfig, String> {
    toml::from_str(text).map_err(|e| format!("config error: {e}"))
}

/// Parse only the `[device]` section of a config, ignoring whatever else the
/// file carries. Lets the geometry inspector accept full simulate configs
/// and plan files alike.
pub fn parse_device_only(text: &str) -> Result<DeviceConfig, String> {
    #[derive(Deserialize)]
    struct DeviceOnly {
        #[serde(default)]
        device: DeviceConfig,
    }
    let d: DeviceOnly = toml::from_str(text).map_err(|e| format!("config error: {e}"))?;
    Ok(d.device)
}

pub fn parse_sweep_plan(text: &str) -> Result<SweepPlanConfig, String> {
    toml::from_str(text).map_err(|e| format!("plan error: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_the_reference_device() {
        let cfg = parse_simulate("[run]\nresolution_nm = 40.0\n").unwrap();
        assert_eq!(cfg.device.to_spec(), DeviceSpec::default());
        assert_eq!(cfg.dipole.to_spec(), DipoleSpec::default());
        let s = cfg.run.to_settings();
        assert_eq!(s.delta_nm, 40.0);
        assert_eq!(s.n_lambda, 201);
        assert_eq!(s.max_steps, 200_000);
        assert_eq!(cfg.collection.na, 0.7);
    }

    #[test]
    fn unit_suffixed_keys_round_trip() {
        let text = "\
[device]
R_nm = 740.0
Lambda_nm = 600.0
D_nm = 180.0
N_rings = 8
t_InP_nm = 280.0
t_SiO2_nm = 600.0
n_InP = 3.2

[dipole]
x_nm = 50.0
theta_deg = 6.0

[run]
resolution_nm = 40.0
max_steps = 1000

[collection]
NA = 0.65
fiber = \"980-HP\"
";
        let cfg = parse_simulate(text).unwrap();
        let spec = cfg.device.to_spec();
        assert_eq!(spec.radius_nm, 740.0);
        assert_eq!(spec.pitch_nm, 600.0);
        assert_eq!(spec.hole_d_nm, 180.0);
        assert_eq!(spec.n_rings, 8);
        assert_eq!(spec.n_inp, 3.2);
        assert_eq!(cfg.dipole.x_nm, 50.0);
        assert_eq!(cfg.collection.fiber.as_deref(), Some("980-HP"));
    }

    #[test]
    fn shipped_example_configs_parse() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
        let read = |p: &str| std::fs::read_to_string(format!("{root}/{p}")).unwrap();

        let dev = parse_simulate(&read("configs/device.toml")).unwrap();
        assert_eq!(
            dev.device.to_spec(),
            DeviceSpec::default(),
            "the reference config spells out exactly the default device"
        );
        assert_eq!(dev.run.resolution_nm, 20.0);
        assert_eq!(dev.collection.fiber.as_deref(), Some("980-HP"));

        let coarse = parse_simulate(&read("configs/coarse.toml")).unwrap();
        assert_eq!(coarse.device.n_rings, 8);
        assert_eq!(coarse.run.resolution_nm, 40.0);

        let r = parse_sweep_plan(&read("configs/sweep_radius.toml")).unwrap();
        assert_eq!(r.axis().unwrap(), SweepAxis::R);
        assert_eq!(r.values().unwrap(), vec![740.0, 760.0, 780.0]);

        let h = parse_sweep_plan(&read("configs/sweep_height.toml")).unwrap();
        assert!(h.axis().unwrap().is_postprocessing());
        assert_eq!(h.values().unwrap().len(), 8);

        let d = parse_sweep_plan(&read("configs/sweep_displacement.toml")).unwrap();
        assert_eq!(d.axis().unwrap(), SweepAxis::DipoleX);
        assert_eq!(d.values().unwrap(), vec![0.0, 50.0, 100.0, 150.0]);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let err = parse_simulate("[run]\nresolution_nm = 40.0\nradius_nm = 760.0\n").unwrap_err();
        assert!(err.contains("radius_nm"), "{err}");
        let err =
            parse_simulate("[device]\nR_um = 0.76\n[run]\nresolution_nm = 40.0\n").unwrap_err();
        assert!(err.contains("R_um"), "{err}");
    }

    #[test]
    fn missing_resolution_is_rejected() {
        let err = parse_simulate("[device]\nR_nm = 760.0\n").unwrap_err();
        assert!(err.contains("run"), "{err}");
    }

    #[test]
    fn sweep_plan_parses_and_defaults_values() {
        let plan = parse_sweep_plan(
            "[sweep]\naxis = \"R\"\n\n[run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        let values = plan.values().unwrap();
        assert_eq!(values.len(), 5);
        assert!((values[0] - 684.0).abs() < 1e-9);
        assert!((values[2] - 760.0).abs() < 1e-9);
        assert!((values[4] - 836.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_axis_lists_the_choices() {
        let plan = parse_sweep_plan(
            "[sweep]\naxis = \"radius\"\n\n[run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        let err = plan.values().unwrap_err();
        assert!(err.contains("allowed axes"), "{err}");
        assert!(err.contains("N_rings"), "{err}");
    }

    #[test]
    fn postprocessing_axes_require_explicit_values() {
        let plan =
            parse_sweep_plan("[sweep]\naxis = \"h\"\n\n[run]\nresolution_nm = 40.0\n").unwrap();
        assert!(plan.values().unwrap_err().contains("values"));
        let plan = parse_sweep_plan(
            "[sweep]\naxis = \"h\"\nvalues = [2.0, 4.0, 6.0]\n\n[run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        assert_eq!(plan.values().unwrap(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn displacement_shorthand_expands_from_zero() {
        let plan = parse_sweep_plan(
            "[sweep]\naxis = \"dipole_x\"\nmax_nm = 150.0\nstep_nm = 50.0\n\n\
             [run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        assert_eq!(plan.values().unwrap(), vec![0.0, 50.0, 100.0, 150.0]);
    }

    #[test]
    fn displacement_shorthand_is_exclusive_and_dipole_only() {
        let both = parse_sweep_plan(
            "[sweep]\naxis = \"dipole_x\"\nvalues = [0.0]\nmax_nm = 100.0\nstep_nm = 50.0\n\n\
             [run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        assert!(both.values().unwrap_err().contains("not both"));

        let lonely = parse_sweep_plan(
            "[sweep]\naxis = \"dipole_y\"\nmax_nm = 100.0\n\n[run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        assert!(lonely.values().unwrap_err().contains("together"));

        let device = parse_sweep_plan(
            "[sweep]\naxis = \"R\"\nmax_nm = 100.0\nstep_nm = 50.0\n\n\
             [run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        assert!(device.values().unwrap_err().contains("displacement"));
    }

    #[test]
    fn ring_count_defaults_round_to_integers() {
        let plan = parse_sweep_plan(
            "[sweep]\naxis = \"N_rings\"\n\n[run]\nresolution_nm = 40.0\n",
        )
        .unwrap();
        let values = plan.values().unwrap();
        assert!(values.iter().all(|v| v.fract() == 0.0));
        assert!(values.windows(2).all(|w| w[0] < w[1]));
    }
}
