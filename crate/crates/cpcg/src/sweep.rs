//! Parametric sweeps and spectrum metrology.
//!
//! A sweep varies exactly one device or post-processing parameter across a
//! list of values, runs the full pipeline per value, and appends one row per
//! completed value to a durable results table (CSV plus a JSON-lines
//! mirror). Rows are written and synced as they complete, so an interrupted
//! sweep resumes by skipping the values that already have rows — and the
//! resumed table is byte-identical to an uninterrupted one.
//!
//! The metrology half extracts cavity numbers from spectra: the resonance
//! wavelength by quadratic interpolation around the discrete peak, the FWHM
//! by linear interpolation of the half-maximum crossings, and level-crossing
//! bandwidths such as the wavelength measure over which the Purcell factor
//! stays above a threshold.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::power::Spectrum;

/// The single parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Central disk radius R, nm.
    R,
    /// Ring pitch, nm.
    Pitch,
    /// Hole diameter D, nm.
    D,
    /// Buried oxide thickness, nm.
    TSiO2,
    /// Membrane thickness, nm.
    TInP,
    /// Number of hole rings.
    NRings,
    /// Dipole displacement along x, nm.
    DipoleX,
    /// Dipole displacement along y, nm.
    DipoleY,
    /// Dipole in-plane orientation angle, degrees.
    Theta,
    /// Fiber facet height, um (post-processing only).
    H,
    /// Collection numerical aperture (post-processing only).
    Na,
}

pub const AXIS_NAMES: [(&str, SweepAxis); 11] = [
    ("R", SweepAxis::R),
    ("Lambda", SweepAxis::Pitch),
    ("D", SweepAxis::D),
    ("t_SiO2", SweepAxis::TSiO2),
    ("t_InP", SweepAxis::TInP),
    ("N_rings", SweepAxis::NRings),
    ("dipole_x", SweepAxis::DipoleX),
    ("dipole_y", SweepAxis::DipoleY),
    ("theta", SweepAxis::Theta),
    ("h", SweepAxis::H),
    ("NA", SweepAxis::Na),
];

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        AXIS_NAMES.iter().find(|(_, a)| a == self).unwrap().0
    }

    /// Axes that only re-run post-processing on already-computed fields.
    pub fn is_postprocessing(&self) -> bool {
        matches!(self, SweepAxis::H | SweepAxis::Na)
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AXIS_NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, a)| *a)
            .ok_or_else(|| {
                let allowed: Vec<&str> = AXIS_NAMES.iter().map(|(n, _)| *n).collect();
                format!(
                    "unknown sweep axis {s:?}; allowed axes: {}",
                    allowed.join(", ")
                )
            })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Resonance metrics extracted from one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub lambda_nm: f64,
    pub peak: f64,
    pub fwhm_nm: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResonanceError {
    TooFewSamples(usize),
    /// Maximum sits on a window endpoint: the mode is outside the band.
    NoPeak,
    /// The spectrum never falls to half maximum inside the window.
    UnresolvedWidth,
}

impl fmt::Display for ResonanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResonanceError::TooFewSamples(n) => {
                write!(f, "spectrum has {n} samples; at least 50 required")
            }
            ResonanceError::NoPeak => {
                write!(f, "no-peak: spectrum maximum lies on a window endpoint")
            }
            ResonanceError::UnresolvedWidth => {
                write!(f, "spectrum does not fall to half maximum inside the window")
            }
        }
    }
}

impl std::error::Error for ResonanceError {}

/// Locate the resonance: quadratic interpolation of the discrete peak for
/// the wavelength and height, linear interpolation of the half-maximum
/// crossings for the width, Q = lambda / FWHM.
pub fn find_resonance(spectrum: &Spectrum) -> Result<Resonance, ResonanceError> {
    let n = spectrum.values.len();
    if n < 50 {
        return Err(ResonanceError::TooFewSamples(n));
    }
    let (i_max, _) = spectrum
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    if i_max == 0 || i_max == n - 1 {
        return Err(ResonanceError::NoPeak);
    }
    let (y0, y1, y2) = (
        spectrum.values[i_max - 1],
        spectrum.values[i_max],
        spectrum.values[i_max + 1],
    );
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom.abs() > 0.0 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let d_lambda = spectrum.lambdas_nm[1] - spectrum.lambdas_nm[0];
    let lambda_nm = spectrum.lambdas_nm[i_max] + offset * d_lambda;
    let peak = y1 - 0.25 * (y0 - y2) * offset;

    let half = 0.5 * peak;
    // Walk outward from the peak to the first crossing on each side.
    let left = (0..i_max)
        .rev()
        .find(|&i| spectrum.values[i] <= half)
        .map(|i| {
            let (a, b) = (spectrum.values[i], spectrum.values[i + 1]);
            spectrum.lambdas_nm[i] + d_lambda * (half - a) / (b - a)
        });
    let right = (i_max + 1..n)
        .find(|&i| spectrum.values[i] <= half)
        .map(|i| {
            let (a, b) = (spectrum.values[i - 1], spectrum.values[i]);
            spectrum.lambdas_nm[i - 1] + d_lambda * (a - half) / (a - b)
        });
    let (l, r) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(ResonanceError::UnresolvedWidth),
    };
    let fwhm_nm = r - l;
    Ok(Resonance {
        lambda_nm,
        peak,
        fwhm_nm,
        q: lambda_nm / fwhm_nm,
    })
}

/// Wavelength measure over which the spectrum stays at or above a
/// threshold. `primary_nm` is the contiguous interval containing the global
/// peak (0 when the whole spectrum is below threshold); `total_nm` sums all
/// such intervals; `multi_interval` marks the presence of more than one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthAbove {
    pub primary_nm: f64,
    pub total_nm: f64,
    pub multi_interval: bool,
}

pub fn bandwidth_above(spectrum: &Spectrum, threshold: f64) -> BandwidthAbove {
    assert!(threshold > 0.0, "threshold must be positive");
    let n = spectrum.values.len();
    let ls = &spectrum.lambdas_nm;
    let ys = &spectrum.values;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..n {
        let above = ys[i] >= threshold;
        if above && start.is_none() {
            let lo = if i == 0 {
                ls[0]
            } else {
                // Linear crossing between i-1 (below) and i (above).
                ls[i - 1] + (ls[i] - ls[i - 1]) * (threshold - ys[i - 1]) / (ys[i] - ys[i - 1])
            };
            start = Some(lo);
        } else if !above {
            if let Some(lo) = start.take() {
                let hi =
                    ls[i - 1] + (ls[i] - ls[i - 1]) * (ys[i - 1] - threshold) / (ys[i - 1] - ys[i]);
                intervals.push((lo, hi));
            }
        }
    }
    if let Some(lo) = start.take() {
        intervals.push((lo, ls[n - 1]));
    }
    if intervals.is_empty() {
        return BandwidthAbove {
            primary_nm: 0.0,
            total_nm: 0.0,
            multi_interval: false,
        };
    }
    let (i_max, _) = ys
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let peak_lambda = ls[i_max];
    let primary = intervals
        .iter()
        .find(|(lo, hi)| *lo <= peak_lambda && peak_lambda <= *hi)
        .map(|(lo, hi)| hi - lo)
        .unwrap_or(0.0);
    BandwidthAbove {
        primary_nm: primary,
        total_nm: intervals.iter().map(|(lo, hi)| hi - lo).sum(),
        multi_interval: intervals.len() > 1,
    }
}

/// Dipole-displacement value list: 0, step, 2 step, ... up to max inclusive
/// (within half a step). The axis itself is `dipole_x` or `dipole_y`.
pub fn displacement_values(max_nm: f64, step_nm: f64) -> Result<Vec<f64>, String> {
    if !(step_nm > 0.0) {
        return Err("displacement step must be positive".into());
    }
    if max_nm < 0.0 {
        return Err("displacement maximum must be non-negative".into());
    }
    let count = (max_nm / step_nm + 0.5).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step_nm).collect())
}

/// Metrics of one completed sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub lambda_cav_nm: f64,
    pub f_p_peak: f64,
    pub q: f64,
    pub w_fp10_nm: f64,
    pub w_fp10_total_nm: f64,
    pub multi_interval: bool,
    pub eta_ext: f64,
    pub eta_obj: f64,
    pub eta_coll: f64,
    /// Fiber coupling at the optimal facet height, when requested.
    pub eta_mc: Option<f64>,
    pub eta_smf: Option<f64>,
    pub h_opt_um: Option<f64>,
    pub not_decayed: bool,
    pub truncation: bool,
}

/// One row of the results table: the swept value plus either metrics or the
/// recorded per-value failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Option<PointMetrics>,
    pub error: Option<String>,
}

pub const SWEEP_CSV_HEADER: &str = "value,lambda_cav_nm,f_p_peak,q,w_fp10_nm,w_fp10_total_nm,\
multi_interval,eta_ext,eta_obj,eta_coll,eta_mc,eta_smf,h_opt_um,not_decayed,truncation,error";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepRow {
    fn to_csv(&self) -> String {
        match &self.metrics {
            Some(m) => format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.value,
                m.lambda_cav_nm,
                m.f_p_peak,
                m.q,
                m.w_fp10_nm,
                m.w_fp10_total_nm,
                m.multi_interval,
                m.eta_ext,
                m.eta_obj,
                m.eta_coll,
                opt_num(m.eta_mc),
                opt_num(m.eta_smf),
                opt_num(m.h_opt_um),
                m.not_decayed,
                m.truncation,
                self.error.as_deref().map(csv_escape).unwrap_or_default()
            ),
            None => format!(
                "{},,,,,,,,,,,,,,,{}",
                self.value,
                self.error.as_deref().map(csv_escape).unwrap_or_default()
            ),
        }
    }
}

#[derive(Debug)]
pub enum SweepError {
    Io(std::io::Error),
    /// Existing results do not correspond to this plan.
    ResumeMismatch(String),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::Io(e) => write!(f, "sweep I/O error: {e}"),
            SweepError::ResumeMismatch(s) => write!(f, "cannot resume sweep: {s}"),
        }
    }
}

impl std::error::Error for SweepError {}

impl From<std::io::Error> for SweepError {
    fn from(e: std::io::Error) -> Self {
        SweepError::Io(e)
    }
}

/// Paths of the two table files a sweep maintains.
pub struct SweepTable {
    pub csv_path: PathBuf,
    pub jsonl_path: PathBuf,
}

impl SweepTable {
    pub fn new(dir: &Path, stem: &str) -> SweepTable {
        SweepTable {
            csv_path: dir.join(format!("{stem}.csv")),
            jsonl_path: dir.join(format!("{stem}.jsonl")),
        }
    }
}

/// How many leading plan values already have rows, verifying that the
/// existing table is a prefix of this plan's output.
fn completed_rows(table: &SweepTable, values: &[f64]) -> Result<Vec<SweepRow>, SweepError> {
    if !table.csv_path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&table.csv_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_CSV_HEADER => {}
        Some(h) => {
            return Err(SweepError::ResumeMismatch(format!(
                "existing table has a different header: {h:?}"
            )))
        }
        None => return Ok(Vec::new()),
    }
    let jsonl = fs::read_to_string(&table.jsonl_path).unwrap_or_default();
    let mut rows = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        let row: SweepRow = serde_json::from_str(line).map_err(|e| {
            SweepError::ResumeMismatch(format!("bad JSONL row {}: {e}", i + 1))
        })?;
        rows.push(row);
    }
    let csv_rows = lines.filter(|l| !l.is_empty()).count();
    if csv_rows != rows.len() {
        return Err(SweepError::ResumeMismatch(format!(
            "CSV has {csv_rows} rows but JSONL has {}",
            rows.len()
        )));
    }
    if rows.len() > values.len() {
        return Err(SweepError::ResumeMismatch(format!(
            "table already has {} rows but the plan lists {} values",
            rows.len(),
            values.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.value.to_bits() != values[i].to_bits() {
            return Err(SweepError::ResumeMismatch(format!(
                "row {} was computed for value {} but the plan lists {}",
                i + 1,
                row.value,
                values[i]
            )));
        }
    }
    Ok(rows)
}

/// Run a sweep: one `runner` call per value not already in the table, each
/// completed row appended and synced before the next value starts. Per-value
/// failures are recorded in the row and the sweep continues. Returns every
/// row, including previously completed ones.
pub fn run_sweep(
    values: &[f64],
    table: &SweepTable,
    mut runner: impl FnMut(f64) -> Result<PointMetrics, String>,
) -> Result<Vec<SweepRow>, SweepError> {
    let mut rows = completed_rows(table, values)?;
    let fresh = rows.is_empty() && !table.csv_path.exists();
    let mut csv = BufWriter::new(
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&table.csv_path)?,
    );
    if fresh {
        writeln!(csv, "{SWEEP_CSV_HEADER}")?;
        csv.flush()?;
    }
    let mut jsonl = BufWriter::new(
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&table.jsonl_path)?,
    );
    for &value in &values[rows.len()..] {
        let row = match runner(value) {
            Ok(metrics) => SweepRow {
                value,
                metrics: Some(metrics),
                error: None,
            },
            Err(e) => SweepRow {
                value,
                metrics: None,
                error: Some(e),
            },
        };
        writeln!(csv, "{}", row.to_csv())?;
        csv.flush()?;
        csv.get_ref().sync_all()?;
        writeln!(
            jsonl,
            "{}",
            serde_json::to_string(&row).expect("sweep row serializes")
        )?;
        jsonl.flush()?;
        jsonl.get_ref().sync_all()?;
        rows.push(row);
    }
    Ok(rows)
}
