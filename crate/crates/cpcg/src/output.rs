//! Result files: spectra tables, far-field and facet tables, the binary
//! monitor record, and the per-run manifest.
//!
//! Text tables use the shortest round-trip float formatting, so identical
//! inputs always produce byte-identical files. Every writer goes through a
//! temp-file-and-rename so a failed run never leaves a partial table behind.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::checkpoint::{BinReader, BinWriter, CheckpointError};
use crate::engine::monitor::PlaneRecord;
use crate::farfield::FarField;
use crate::fiber::FacetField;
use crate::power::{PowerSpectrum, Spectrum};

/// Write `content` to `path` atomically: all or nothing.
pub fn write_atomic(path: &Path, content: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}

/// `lambda_nm,<metric>` table for a dimensionless spectrum.
pub fn spectrum_csv(metric: &str, s: &Spectrum) -> String {
    let mut out = format!("lambda_nm,{metric}\n");
    for (l, v) in s.lambdas_nm.iter().zip(&s.values) {
        out.push_str(&format!("{l},{v}\n"));
    }
    out
}

/// `lambda_nm,<metric>` table for a power spectrum (watts per unit current
/// moment squared).
pub fn power_csv(metric: &str, p: &PowerSpectrum) -> String {
    let mut out = format!("lambda_nm,{metric}\n");
    for (l, v) in p.lambdas_nm.iter().zip(&p.watts) {
        out.push_str(&format!("{l},{v}\n"));
    }
    out
}

/// `theta_deg,phi_deg,power_density` table of a far field (W/sr per unit
/// current moment squared).
pub fn farfield_csv(ff: &FarField) -> String {
    let mut out = String::from("theta_deg,phi_deg,power_density\n");
    for (it, th) in ff.theta_deg.iter().enumerate() {
        for (ip, ph) in ff.phi_deg.iter().enumerate() {
            out.push_str(&format!("{th},{ph},{}\n", ff.intensity(it, ip)));
        }
    }
    out
}

/// `x_um,y_um,re_ex,im_ex,re_ey,im_ey` table of a propagated facet field.
pub fn facet_csv(f: &FacetField) -> String {
    let mut out = String::from("x_um,y_um,re_ex,im_ex,re_ey,im_ey\n");
    for iy in 0..f.n {
        for ix in 0..f.n {
            let p = iy * f.n + ix;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f.x_m(ix) * 1e6,
                f.y_m(iy) * 1e6,
                f.ex[p].re,
                f.ex[p].im,
                f.ey[p].re,
                f.ey[p].im
            ));
        }
    }
    out
}

/// Read back a `lambda_nm,<metric>` table written by [`spectrum_csv`] or
/// [`power_csv`].
pub fn parse_spectrum_csv(text: &str) -> Result<Spectrum, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty spectrum file")?;
    if !header.starts_with("lambda_nm,") {
        return Err(format!("unexpected spectrum header {header:?}"));
    }
    let mut lambdas_nm = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (l, v) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two columns", i + 2))?;
        lambdas_nm.push(
            l.parse::<f64>()
                .map_err(|e| format!("line {}: bad wavelength: {e}", i + 2))?,
        );
        values.push(
            v.parse::<f64>()
                .map_err(|e| format!("line {}: bad value: {e}", i + 2))?,
        );
    }
    Ok(Spectrum::new(lambdas_nm, values))
}

const PLANE_MAGIC: &[u8; 8] = b"CPCGPLN1";
const PLANE_VERSION: u32 = 1;

/// Save a collection-plane record: versioned little-endian binary with a
/// checksum trailer, the format documented in docs/formats.md.
pub fn save_plane_record(path: &Path, rec: &PlaneRecord) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BinWriter::new(BufWriter::new(File::create(&tmp)?));
        w.bytes(PLANE_MAGIC)?;
        w.u32(PLANE_VERSION)?;
        w.u64(rec.nx as u64)?;
        w.u64(rec.ny as u64)?;
        w.f64(rec.delta_m)?;
        w.f64(rec.x0_m)?;
        w.f64(rec.y0_m)?;
        w.f64(rec.z_above_ref_m)?;
        w.u32(rec.not_decayed as u32)?;
        w.f64_slice(&rec.lambdas_nm)?;
        w.c64_slice(&rec.ex)?;
        w.c64_slice(&rec.ey)?;
        w.c64_slice(&rec.hx)?;
        w.c64_slice(&rec.hy)?;
        w.finish()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_plane_record(path: &Path) -> Result<PlaneRecord, CheckpointError> {
    let mut r = BinReader::new(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 8];
    r.bytes(&mut magic)?;
    if &magic != PLANE_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != PLANE_VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let nx = r.u64()? as usize;
    let ny = r.u64()? as usize;
    let delta_m = r.f64()?;
    let x0_m = r.f64()?;
    let y0_m = r.f64()?;
    let z_above_ref_m = r.f64()?;
    let not_decayed = r.u32()? != 0;
    // The wavelength count comes from the length-prefixed axis itself.
    let nl_hint = peek_len(path)?;
    let mut lambdas_nm = vec![0.0; nl_hint];
    r.f64_slice_into(&mut lambdas_nm, "wavelength axis")?;
    let npts = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(lambdas_nm.len()))
        .ok_or_else(|| CheckpointError::Mismatch("plane record too large".into()))?;
    let mut ex = vec![Complex64::new(0.0, 0.0); npts];
    let mut ey = ex.clone();
    let mut hx = ex.clone();
    let mut hy = ex.clone();
    r.c64_slice_into(&mut ex, "ex")?;
    r.c64_slice_into(&mut ey, "ey")?;
    r.c64_slice_into(&mut hx, "hx")?;
    r.c64_slice_into(&mut hy, "hy")?;
    r.finish()?;
    Ok(PlaneRecord {
        lambdas_nm,
        delta_m,
        nx,
        ny,
        x0_m,
        y0_m,
        z_above_ref_m,
        ex,
        ey,
        hx,
        hy,
        not_decayed,
    })
}

/// The wavelength-axis length sits at a fixed offset; read it directly so
/// the main reader can pre-size its buffer.
fn peek_len(path: &Path) -> Result<usize, CheckpointError> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    // magic 8 + version 4 + nx 8 + ny 8 + 4 f64 (32) + flag 4 = 64 bytes.
    f.seek(SeekFrom::Start(64))?;
    let mut b = [0u8; 8];
    f.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b) as usize)
}

/// 64-bit FNV-1a, used for content-derived run identifiers.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Per-run provenance: what ran, from which config, producing which files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub code_version: String,
    /// The input config, byte for byte.
    pub config_snapshot: String,
    pub grid_cells: [usize; 3],
    pub resolution_nm: f64,
    pub steps: u64,
    pub wall_seconds: f64,
    pub not_decayed: bool,
    /// File names (relative to the manifest) this run produced.
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Deterministic identifier: config stem plus a hash of the config
    /// bytes, so distinct configs never collide on an output directory.
    pub fn run_id_for(config_path: &Path, config_bytes: &[u8]) -> String {
        let stem = config_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run");
        format!("{stem}-{:08x}", content_hash(config_bytes) as u32)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.run_id));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
