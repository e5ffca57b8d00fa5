//! Device geometry: sunflower-style circular grating hole layouts and their
//! voxelization onto the uniform simulation grid.
//!
//! The structure is a planar stack (bottom to top): metal mirror, SiO2 spacer,
//! InP membrane, vacuum. Cylindrical holes are etched through the full InP
//! thickness in concentric rings around the device axis. Ring `N` (1-based)
//! carries `n_fold * N` holes at radius `R + pitch * (N - 1)`, hole `m` of the
//! ring sitting at polar angle `2 pi m / (n_fold * N)`. Scaling the hole count
//! with the ring index keeps the azimuthal hole spacing roughly constant with
//! radius, which is what distinguishes this layout from a plain bullseye
//! grating.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DESIGN_WAVELENGTH_NM, MIN_SAMPLES_PER_VACUUM_WAVELENGTH};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("n_fold must be at least 1")]
    ZeroFold,
    #[error("refractive index {name} must be >= 1 (got {value})")]
    BadIndex { name: &'static str, value: f64 },
    #[error("holes overlap in ring {ring}: azimuthal gap {gap_nm:.3} nm is not positive")]
    HoleOverlap { ring: u32, gap_nm: f64 },
    #[error(
        "grid pitch {delta_nm} nm is too coarse: {got:.1} samples per {lambda_nm} nm vacuum \
         wavelength, need at least {need}"
    )]
    ResolutionTooCoarse {
        delta_nm: f64,
        lambda_nm: f64,
        got: f64,
        need: f64,
    },
}

/// Full parameter set of one device. Lengths in nm, indices dimensionless.
///
/// `radius_nm` is the radius of the innermost hole ring, `pitch_nm` the radial
/// spacing between consecutive rings and `hole_d_nm` the hole diameter. The
/// refractive indices default to cryogenic (4 K) values since the intended
/// emitters only operate there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub radius_nm: f64,
    pub pitch_nm: f64,
    pub hole_d_nm: f64,
    pub n_fold: u32,
    pub n_rings: u32,
    pub t_inp_nm: f64,
    pub t_sio2_nm: f64,
    pub t_mirror_nm: f64,
    pub n_inp: f64,
    pub n_sio2: f64,
}

impl Default for DeviceSpec {
    /// The optimized telecom-band design used throughout the docs and the
    /// regression baselines.
    fn default() -> Self {
        DeviceSpec {
            radius_nm: 760.0,
            pitch_nm: 630.0,
            hole_d_nm: 200.0,
            n_fold: 12,
            n_rings: 10,
            t_inp_nm: 300.0,
            t_sio2_nm: 610.0,
            t_mirror_nm: 100.0,
            n_inp: 3.135,
            n_sio2: 1.443,
        }
    }
}

impl DeviceSpec {
    /// Radius of ring `ring` (1-based): R + pitch * (ring - 1).
    pub fn ring_radius_nm(&self, ring: u32) -> f64 {
        self.radius_nm + self.pitch_nm * (ring as f64 - 1.0)
    }

    /// Number of holes in ring `ring` (1-based).
    pub fn ring_hole_count(&self, ring: u32) -> u32 {
        self.n_fold * ring
    }

    /// Total number of holes over all rings: n_fold * N (N + 1) / 2.
    pub fn total_hole_count(&self) -> u32 {
        self.n_fold * self.n_rings * (self.n_rings + 1) / 2
    }

    /// Radius of the outermost material feature (outer hole rim of the last
    /// ring). Zero rings means a bare layer stack.
    pub fn outer_extent_nm(&self) -> f64 {
        if self.n_rings == 0 {
            0.0
        } else {
            self.ring_radius_nm(self.n_rings) + 0.5 * self.hole_d_nm
        }
    }

    pub fn eps_inp(&self) -> f64 {
        self.n_inp * self.n_inp
    }

    pub fn eps_sio2(&self) -> f64 {
        self.n_sio2 * self.n_sio2
    }

    /// Check parameter ranges and hole clearances for every ring.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let positives = [
            ("radius_nm", self.radius_nm),
            ("pitch_nm", self.pitch_nm),
            ("hole_d_nm", self.hole_d_nm),
            ("t_inp_nm", self.t_inp_nm),
            ("t_sio2_nm", self.t_sio2_nm),
            ("t_mirror_nm", self.t_mirror_nm),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeometryError::NonPositive { name, value });
            }
        }
        if self.n_fold == 0 {
            return Err(GeometryError::ZeroFold);
        }
        for (name, value) in [("n_InP", self.n_inp), ("n_SiO2", self.n_sio2)] {
            if !(value >= 1.0) || !value.is_finite() {
                return Err(GeometryError::BadIndex { name, value });
            }
        }
        for ring in 1..=self.n_rings {
            let gap = min_azimuthal_gap_nm(self, ring);
            if gap <= 0.0 {
                return Err(GeometryError::HoleOverlap { ring, gap_nm: gap });
            }
        }
        Ok(())
    }
}

/// One etched hole. Coordinates are in nm relative to the device axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub ring: u32,
    pub m: u32,
    pub x_nm: f64,
    pub y_nm: f64,
    pub diameter_nm: f64,
}

/// All holes of a device, ordered by ring then by azimuthal index.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleLayout {
    pub holes: Vec<Hole>,
}

/// Generate the hole centers for a validated spec. Zero rings yields an empty
/// layout (a bare disk stack).
pub fn generate_hole_layout(spec: &DeviceSpec) -> Result<HoleLayout, GeometryError> {
    spec.validate()?;
    let mut holes = Vec::with_capacity(spec.total_hole_count() as usize);
    for ring in 1..=spec.n_rings {
        let r = spec.ring_radius_nm(ring);
        let count = spec.ring_hole_count(ring);
        for m in 0..count {
            let angle = 2.0 * std::f64::consts::PI * m as f64 / count as f64;
            holes.push(Hole {
                ring,
                m,
                x_nm: r * angle.cos(),
                y_nm: r * angle.sin(),
                diameter_nm: spec.hole_d_nm,
            });
        }
    }
    Ok(HoleLayout { holes })
}

/// Edge-to-edge gap between azimuthal neighbors in ring `ring`:
/// `2 r sin(pi / count) - D`. Within a ring all neighbor gaps are equal, and
/// across rings this is the tightest clearance of the layout (radial
/// neighbors are at least `pitch - D` apart, which is larger for any layout
/// that passes validation).
pub fn min_azimuthal_gap_nm(spec: &DeviceSpec, ring: u32) -> f64 {
    let r = spec.ring_radius_nm(ring);
    let count = spec.ring_hole_count(ring) as f64;
    2.0 * r * (std::f64::consts::PI / count).sin() - spec.hole_d_nm
}

/// Simulation grid footprint: cell counts, absorbing-layer thicknesses and the
/// physical placement of the layer stack inside the domain.
///
/// z = 0 is the domain floor. The mirror top is snapped to a grid node (the
/// metal is modeled as a perfect conductor, so only its top surface matters;
/// its nominal thickness is rounded up to whole cells). The SiO2/InP and
/// InP/vacuum interfaces are *not* snapped: partially filled cells get
/// volume-averaged permittivity, so sub-cell thickness changes remain visible
/// to the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub delta_nm: f64,
    /// Cell counts per axis.
    pub ncx: usize,
    pub ncy: usize,
    pub ncz: usize,
    /// PML thickness in cells per face: [x_lo, x_hi, y_lo, y_hi, z_lo, z_hi].
    /// Zero means the face is a bare perfect-conductor wall.
    pub pml: [usize; 6],
    /// Device axis position, nm from the domain corner.
    pub center_x_nm: f64,
    pub center_y_nm: f64,
    /// Layer interface heights, nm from the domain floor.
    pub z_mirror_top_nm: f64,
    pub z_sio2_top_nm: f64,
    pub z_inp_top_nm: f64,
}

impl GridLayout {
    /// Build the standard domain for a device run: the layout plus one design
    /// wavelength of lateral clearance and half a wavelength of vacuum above
    /// the membrane before the PML starts; mirror-backed floor (no PML below).
    pub fn for_device(spec: &DeviceSpec, delta_nm: f64, pml_cells: usize) -> Result<Self, GeometryError> {
        check_resolution(delta_nm)?;
        let lambda = DESIGN_WAVELENGTH_NM;
        let half_lateral_nm = spec.outer_extent_nm() + lambda;
        let half_cells = (half_lateral_nm / delta_nm).ceil() as usize + pml_cells;
        let ncx = 2 * half_cells;
        let ncy = ncx;

        let mirror_cells = (spec.t_mirror_nm / delta_nm).ceil().max(1.0) as usize;
        let z_mirror_top_nm = mirror_cells as f64 * delta_nm;
        let z_sio2_top_nm = z_mirror_top_nm + spec.t_sio2_nm;
        let z_inp_top_nm = z_sio2_top_nm + spec.t_inp_nm;
        // Vacuum clearance above the membrane: half a wavelength plus a few
        // cells so the near-field monitor plane sits well clear of the PML.
        let vac_nm = 0.5 * lambda + 4.0 * delta_nm;
        let ncz = ((z_inp_top_nm + vac_nm) / delta_nm).ceil() as usize + pml_cells;

        Ok(GridLayout {
            delta_nm,
            ncx,
            ncy,
            ncz,
            pml: [pml_cells, pml_cells, pml_cells, pml_cells, 0, pml_cells],
            center_x_nm: (ncx / 2) as f64 * delta_nm,
            center_y_nm: (ncy / 2) as f64 * delta_nm,
            z_mirror_top_nm,
            z_sio2_top_nm,
            z_inp_top_nm,
        })
    }

    /// Height of the emitter plane: mid-thickness of the InP membrane.
    pub fn z_membrane_mid_nm(&self) -> f64 {
        0.5 * (self.z_sio2_top_nm + self.z_inp_top_nm)
    }
}

pub fn check_resolution(delta_nm: f64) -> Result<(), GeometryError> {
    let got = DESIGN_WAVELENGTH_NM / delta_nm;
    if !(delta_nm > 0.0) || !delta_nm.is_finite() {
        return Err(GeometryError::NonPositive {
            name: "delta_nm",
            value: delta_nm,
        });
    }
    if got < MIN_SAMPLES_PER_VACUUM_WAVELENGTH {
        return Err(GeometryError::ResolutionTooCoarse {
            delta_nm,
            lambda_nm: DESIGN_WAVELENGTH_NM,
            got,
            need: MIN_SAMPLES_PER_VACUUM_WAVELENGTH,
        });
    }
    Ok(())
}

/// Relative permittivity and conductor mask per grid cell, sampled at cell
/// centers. Index order matches the field arrays: `(ix * ncy + iy) * ncz + iz`.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub ncx: usize,
    pub ncy: usize,
    pub ncz: usize,
    pub delta_nm: f64,
    pub eps: Vec<f64>,
    pub pec: Vec<bool>,
}

impl MaterialMap {
    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ncy + iy) * self.ncz + iz
    }

    /// Uniform non-magnetic medium filling the whole domain (no conductor).
    pub fn uniform(ncx: usize, ncy: usize, ncz: usize, delta_nm: f64, eps_r: f64) -> Self {
        let n = ncx * ncy * ncz;
        MaterialMap {
            ncx,
            ncy,
            ncz,
            delta_nm,
            eps: vec![eps_r; n],
            pec: vec![false; n],
        }
    }
}

/// In-plane supersampling factor for hole antialiasing (per axis, per cell).
const SUBSAMPLES: usize = 8;

/// Rasterize a device onto the grid with volume-averaged permittivity.
///
/// Every cell gets the arithmetic mean of the permittivities of the materials
/// intersecting it. Layer interfaces are resolved exactly along z (they are
/// planes); hole rims are resolved by supersampling each cell footprint with
/// an 8x8 point grid. Cells inside the mirror are flagged as perfect
/// conductor. A boundary cell that is half air and half InP therefore gets
/// eps = (1 + n_InP^2) / 2.
pub fn voxelize(spec: &DeviceSpec, grid: &GridLayout) -> Result<MaterialMap, GeometryError> {
    spec.validate()?;
    check_resolution(grid.delta_nm)?;
    let layout = generate_hole_layout(spec)?;
    let d = grid.delta_nm;
    let (ncx, ncy, ncz) = (grid.ncx, grid.ncy, grid.ncz);
    let mut map = MaterialMap::uniform(ncx, ncy, ncz, d, 1.0);

    let air_fraction = column_air_fractions(spec, grid, &layout);

    // Exact per-cell overlap fractions of the z-layers.
    let mirror_cells = (grid.z_mirror_top_nm / d).round() as usize;
    let eps_sio2 = spec.eps_sio2();
    let eps_inp = spec.eps_inp();
    for ix in 0..ncx {
        for iy in 0..ncy {
            let f_air = air_fraction[ix * ncy + iy];
            let eps_membrane = f_air + (1.0 - f_air) * eps_inp;
            for iz in 0..ncz {
                let idx = map.idx(ix, iy, iz);
                if iz < mirror_cells {
                    map.pec[idx] = true;
                    continue;
                }
                let z0 = iz as f64 * d;
                let z1 = z0 + d;
                let f_sio2 = overlap(z0, z1, grid.z_mirror_top_nm, grid.z_sio2_top_nm) / d;
                let f_inp = overlap(z0, z1, grid.z_sio2_top_nm, grid.z_inp_top_nm) / d;
                let f_vac = (1.0 - f_sio2 - f_inp).max(0.0);
                map.eps[idx] = f_vac + f_sio2 * eps_sio2 + f_inp * eps_membrane;
            }
        }
    }
    Ok(map)
}

/// Air area fraction of each (ix, iy) cell footprint within the hole pattern,
/// supersampled. 0 for solid membrane, 1 inside a hole.
fn column_air_fractions(spec: &DeviceSpec, grid: &GridLayout, layout: &HoleLayout) -> Vec<f64> {
    let d = grid.delta_nm;
    let (ncx, ncy) = (grid.ncx, grid.ncy);
    let r_hole = 0.5 * spec.hole_d_nm;
    let mut frac = vec![0.0f64; ncx * ncy];
    if layout.holes.is_empty() {
        return frac;
    }

    // Bin hole indices on a coarse 2D grid so each cell only tests nearby rims.
    let bin_nm = (spec.hole_d_nm + 2.0 * d).max(4.0 * d);
    let nbx = (ncx as f64 * d / bin_nm).ceil() as usize + 1;
    let nby = (ncy as f64 * d / bin_nm).ceil() as usize + 1;
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nbx * nby];
    for (h_idx, h) in layout.holes.iter().enumerate() {
        let hx = h.x_nm + grid.center_x_nm;
        let hy = h.y_nm + grid.center_y_nm;
        let bx0 = (((hx - r_hole) / bin_nm).floor().max(0.0) as usize).min(nbx - 1);
        let bx1 = (((hx + r_hole) / bin_nm).floor().max(0.0) as usize).min(nbx - 1);
        let by0 = (((hy - r_hole) / bin_nm).floor().max(0.0) as usize).min(nby - 1);
        let by1 = (((hy + r_hole) / bin_nm).floor().max(0.0) as usize).min(nby - 1);
        for bx in bx0..=bx1 {
            for by in by0..=by1 {
                bins[bx * nby + by].push(h_idx as u32);
            }
        }
    }

    let half_diag = d * std::f64::consts::SQRT_2 / 2.0;
    let inv_ss = 1.0 / SUBSAMPLES as f64;
    for ix in 0..ncx {
        for iy in 0..ncy {
            let cx = (ix as f64 + 0.5) * d;
            let cy = (iy as f64 + 0.5) * d;
            let bx = ((cx / bin_nm).floor().max(0.0) as usize).min(nbx - 1);
            let by = ((cy / bin_nm).floor().max(0.0) as usize).min(nby - 1);
            let candidates = &bins[bx * nby + by];
            if candidates.is_empty() {
                continue;
            }
            let mut covered = 0.0f64;
            let mut rim = false;
            for &h_idx in candidates {
                let h = &layout.holes[h_idx as usize];
                let dx = cx - (h.x_nm + grid.center_x_nm);
                let dy = cy - (h.y_nm + grid.center_y_nm);
                let dist = (dx * dx + dy * dy).sqrt();
                if dist <= r_hole - half_diag {
                    covered = 1.0;
                    rim = false;
                    break;
                }
                if dist < r_hole + half_diag {
                    rim = true;
                }
            }
            if rim {
                // Supersample the footprint against every nearby hole.
                let mut inside = 0u32;
                for sx in 0..SUBSAMPLES {
                    for sy in 0..SUBSAMPLES {
                        let px = ix as f64 * d + (sx as f64 + 0.5) * inv_ss * d;
                        let py = iy as f64 * d + (sy as f64 + 0.5) * inv_ss * d;
                        let hit = candidates.iter().any(|&h_idx| {
                            let h = &layout.holes[h_idx as usize];
                            let dx = px - (h.x_nm + grid.center_x_nm);
                            let dy = py - (h.y_nm + grid.center_y_nm);
                            dx * dx + dy * dy < r_hole * r_hole
                        });
                        if hit {
                            inside += 1;
                        }
                    }
                }
                covered = inside as f64 / (SUBSAMPLES * SUBSAMPLES) as f64;
            }
            frac[ix * ncy + iy] = covered;
        }
    }
    frac
}

/// Voxelized InP volume of the device in nm^3 (diagnostic; converges to the
/// analytic slab-minus-holes volume as the grid is refined).
pub fn voxelized_inp_volume_nm3(spec: &DeviceSpec, grid: &GridLayout) -> Result<f64, GeometryError> {
    spec.validate()?;
    check_resolution(grid.delta_nm)?;
    let layout = generate_hole_layout(spec)?;
    let air = column_air_fractions(spec, grid, &layout);
    let d = grid.delta_nm;
    // z direction is exact: each column contributes t_InP of membrane height.
    let per_column = d * d * spec.t_inp_nm;
    Ok(air.iter().map(|f| (1.0 - f) * per_column).sum())
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}
