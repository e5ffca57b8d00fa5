//! Binary run-state snapshots.
//!
//! A snapshot captures everything the leapfrog loop needs to continue a run
//! bit-for-bit: the six field arrays, the PML convolution accumulators, the
//! monitor transforms, the source-spectrum transform and the step index.
//! Layout (documented in `docs/formats.md`): a fixed magic + version header,
//! little-endian scalars, `f64` arrays prefixed by a `u64` length, complex
//! arrays stored as interleaved re/im pairs, and a trailing FNV-1a 64-bit
//! checksum of every preceding byte so truncated or corrupted files are
//! rejected instead of silently resuming from garbage.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::engine::monitor::{BoxDft, FaceDft, SourceSpectrum};
use crate::engine::{Engine, FieldComp};

pub const MAGIC: &[u8; 8] = b"CPCGSNP1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    BadVersion(u32),
    #[error("snapshot does not match this run: {0}")]
    Mismatch(String),
    #[error("checksum mismatch: file is truncated or corrupted")]
    BadChecksum,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    let mut h = hash;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Checksummed little-endian writer.
pub struct BinWriter<W: Write> {
    inner: W,
    hash: u64,
}

impl<W: Write> BinWriter<W> {
    pub fn new(inner: W) -> Self {
        BinWriter {
            inner,
            hash: FNV_OFFSET,
        }
    }

    pub fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.hash = fnv1a(self.hash, b);
        self.inner.write_all(b)
    }

    pub fn u32(&mut self, v: u32) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64_slice(&mut self, v: &[f64]) -> io::Result<()> {
        self.u64(v.len() as u64)?;
        let mut buf = [0u8; 8 * 1024];
        for chunk in v.chunks(1024) {
            let nb = chunk.len() * 8;
            for (i, x) in chunk.iter().enumerate() {
                buf[i * 8..i * 8 + 8].copy_from_slice(&x.to_le_bytes());
            }
            self.bytes(&buf[..nb])?;
        }
        Ok(())
    }

    pub fn c64_slice(&mut self, v: &[Complex64]) -> io::Result<()> {
        self.u64(v.len() as u64)?;
        let mut buf = [0u8; 8 * 1024];
        for chunk in v.chunks(512) {
            let nb = chunk.len() * 16;
            for (i, x) in chunk.iter().enumerate() {
                buf[i * 16..i * 16 + 8].copy_from_slice(&x.re.to_le_bytes());
                buf[i * 16 + 8..i * 16 + 16].copy_from_slice(&x.im.to_le_bytes());
            }
            self.bytes(&buf[..nb])?;
        }
        Ok(())
    }

    /// Append the checksum trailer and flush.
    pub fn finish(mut self) -> io::Result<()> {
        let h = self.hash;
        self.inner.write_all(&h.to_le_bytes())?;
        self.inner.flush()
    }
}

/// Checksummed little-endian reader mirroring `BinWriter`.
pub struct BinReader<R: Read> {
    inner: R,
    hash: u64,
}

impl<R: Read> BinReader<R> {
    pub fn new(inner: R) -> Self {
        BinReader {
            inner,
            hash: FNV_OFFSET,
        }
    }

    pub fn bytes(&mut self, out: &mut [u8]) -> Result<(), CheckpointError> {
        self.inner.read_exact(out)?;
        self.hash = fnv1a(self.hash, out);
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32, CheckpointError> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64, CheckpointError> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64, CheckpointError> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Read a length-prefixed f64 array into `out`; the length must match.
    pub fn f64_slice_into(&mut self, out: &mut [f64], what: &str) -> Result<(), CheckpointError> {
        let n = self.u64()? as usize;
        if n != out.len() {
            return Err(CheckpointError::Mismatch(format!(
                "{what}: file has {n} samples, run expects {}",
                out.len()
            )));
        }
        let mut buf = [0u8; 8 * 1024];
        let mut done = 0usize;
        while done < n {
            let take = (n - done).min(1024);
            let nb = take * 8;
            self.bytes(&mut buf[..nb])?;
            for i in 0..take {
                out[done + i] = f64::from_le_bytes(buf[i * 8..i * 8 + 8].try_into().unwrap());
            }
            done += take;
        }
        Ok(())
    }

    pub fn c64_slice_into(
        &mut self,
        out: &mut [Complex64],
        what: &str,
    ) -> Result<(), CheckpointError> {
        let n = self.u64()? as usize;
        if n != out.len() {
            return Err(CheckpointError::Mismatch(format!(
                "{what}: file has {n} samples, run expects {}",
                out.len()
            )));
        }
        let mut buf = [0u8; 8 * 1024];
        let mut done = 0usize;
        while done < n {
            let take = (n - done).min(512);
            let nb = take * 16;
            self.bytes(&mut buf[..nb])?;
            for i in 0..take {
                let re = f64::from_le_bytes(buf[i * 16..i * 16 + 8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[i * 16 + 8..i * 16 + 16].try_into().unwrap());
                out[done + i] = Complex64::new(re, im);
            }
            done += take;
        }
        Ok(())
    }

    /// Verify the checksum trailer (call after the last payload read).
    pub fn finish(mut self) -> Result<(), CheckpointError> {
        let expected = self.hash;
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        if u64::from_le_bytes(b) != expected {
            return Err(CheckpointError::BadChecksum);
        }
        Ok(())
    }
}

const ALL_COMPS: [FieldComp; 6] = [
    FieldComp::Ex,
    FieldComp::Ey,
    FieldComp::Ez,
    FieldComp::Hx,
    FieldComp::Hy,
    FieldComp::Hz,
];

fn write_engine<W: Write>(w: &mut BinWriter<W>, eng: &Engine) -> io::Result<()> {
    let (ncx, ncy, ncz) = eng.cell_counts();
    w.u64(ncx as u64)?;
    w.u64(ncy as u64)?;
    w.u64(ncz as u64)?;
    for p in eng.pml() {
        w.u64(p as u64)?;
    }
    w.f64(eng.delta())?;
    w.u64(eng.steps_done())?;
    for c in ALL_COMPS {
        w.f64_slice(eng.field(c))?;
    }
    for axis in [&eng.pml_x, &eng.pml_y, &eng.pml_z] {
        match axis {
            None => w.u64(0)?,
            Some(p) => {
                w.u64(1)?;
                for arr in p.psi_arrays() {
                    w.f64_slice(arr)?;
                }
            }
        }
    }
    Ok(())
}

fn read_engine<R: Read>(r: &mut BinReader<R>, eng: &mut Engine) -> Result<(), CheckpointError> {
    let (ncx, ncy, ncz) = eng.cell_counts();
    let dims = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
    if dims != (ncx, ncy, ncz) {
        return Err(CheckpointError::Mismatch(format!(
            "grid is {dims:?} in file, {:?} in run",
            (ncx, ncy, ncz)
        )));
    }
    for (f, expected) in eng.pml().into_iter().enumerate() {
        let got = r.u64()? as usize;
        if got != expected {
            return Err(CheckpointError::Mismatch(format!(
                "pml face {f}: {got} cells in file, {expected} in run"
            )));
        }
    }
    let delta = r.f64()?;
    if (delta - eng.delta()).abs() > 1e-15 * eng.delta() {
        return Err(CheckpointError::Mismatch(format!(
            "grid pitch {delta} in file, {} in run",
            eng.delta()
        )));
    }
    let steps = r.u64()?;
    for c in ALL_COMPS {
        r.f64_slice_into(eng.field_mut(c), "field array")?;
    }
    for axis in [&mut eng.pml_x, &mut eng.pml_y, &mut eng.pml_z] {
        let present = r.u64()?;
        match (present, axis) {
            (0, None) => {}
            (1, Some(p)) => {
                for arr in p.psi_arrays_mut() {
                    r.f64_slice_into(arr, "pml state")?;
                }
            }
            _ => {
                return Err(CheckpointError::Mismatch(
                    "pml layout differs between file and run".into(),
                ))
            }
        }
    }
    eng.steps_done = steps;
    Ok(())
}

fn write_face<W: Write>(w: &mut BinWriter<W>, face: &FaceDft) -> io::Result<()> {
    w.u64(face.npts() as u64)?;
    w.u64(face.lambdas_nm().len() as u64)?;
    for which in 0..4 {
        w.c64_slice(face.component(which))?;
    }
    Ok(())
}

fn read_face<R: Read>(r: &mut BinReader<R>, face: &mut FaceDft) -> Result<(), CheckpointError> {
    let npts = r.u64()? as usize;
    let nl = r.u64()? as usize;
    if npts != face.npts() || nl != face.lambdas_nm().len() {
        return Err(CheckpointError::Mismatch(format!(
            "monitor face is {npts} pts x {nl} wavelengths in file, {} x {} in run",
            face.npts(),
            face.lambdas_nm().len()
        )));
    }
    for which in 0..4 {
        r.c64_slice_into(face.component_mut(which), "monitor accumulator")?;
    }
    Ok(())
}

/// Everything a device run checkpoints besides the engine.
pub struct MonitorState<'a> {
    pub source: &'a mut SourceSpectrum,
    pub flux_box: &'a mut BoxDft,
    pub plane: &'a mut FaceDft,
}

/// Write a full run snapshot. The monitors travel with the engine so a
/// resumed run continues the same running transforms.
pub fn save(
    path: &Path,
    eng: &Engine,
    source: &SourceSpectrum,
    flux_box: &BoxDft,
    plane: &FaceDft,
) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BinWriter::new(BufWriter::new(File::create(&tmp)?));
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        write_engine(&mut w, eng)?;
        w.c64_slice(&source.spectrum)?;
        w.u64(flux_box.faces.len() as u64)?;
        for f in &flux_box.faces {
            write_face(&mut w, f)?;
        }
        write_face(&mut w, plane)?;
        w.finish()?;
    }
    // Atomic replace so an interrupted save never clobbers a good snapshot.
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Restore a snapshot into structures already built from the same config.
/// Shapes are validated; on any mismatch the run state is left unspecified
/// and the caller should rebuild.
pub fn restore(
    path: &Path,
    eng: &mut Engine,
    monitors: MonitorState<'_>,
) -> Result<(), CheckpointError> {
    let mut r = BinReader::new(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 8];
    r.bytes(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    read_engine(&mut r, eng)?;
    r.c64_slice_into(&mut monitors.source.spectrum, "source spectrum")?;
    let nfaces = r.u64()? as usize;
    if nfaces != monitors.flux_box.faces.len() {
        return Err(CheckpointError::Mismatch(format!(
            "flux box has {nfaces} faces in file, {} in run",
            monitors.flux_box.faces.len()
        )));
    }
    for f in &mut monitors.flux_box.faces {
        read_face(&mut r, f)?;
    }
    read_face(&mut r, monitors.plane)?;
    r.finish()
}
