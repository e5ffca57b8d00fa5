//! Running discrete-Fourier-transform monitors.
//!
//! During time stepping each monitor accumulates `field(t) * exp(+i omega t) * dt`
//! per wavelength at a set of sample points, so a single broadband run yields
//! complex field maps at every analysis wavelength. E components use the
//! integer-step times, H components the half-step times they actually live
//! on. At finalization all records are divided by the spectrum of the
//! injected source current, making them per unit dipole current moment and
//! independent of the pulse envelope.
//!
//! Sample points sit at the centers of the Yee cell faces crossed by the
//! monitor surface; the four tangential components are averaged onto those
//! points so Poynting fluxes use co-located fields.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::omega_from_lambda_nm;
use crate::engine::{Engine, FieldComp};
use crate::power::PowerSpectrum;

/// Uniformly spaced wavelength axis including both endpoints.
pub fn wavelength_axis(lambda_min_nm: f64, lambda_max_nm: f64, samples: usize) -> Vec<f64> {
    assert!(samples >= 2, "need at least two wavelength samples");
    assert!(lambda_max_nm > lambda_min_nm);
    let step = (lambda_max_nm - lambda_min_nm) / (samples - 1) as f64;
    (0..samples)
        .map(|i| lambda_min_nm + step * i as f64)
        .collect()
}

/// Running transform of the injected source current moment I dl(t).
#[derive(Debug, Clone)]
pub struct SourceSpectrum {
    pub lambdas_nm: Vec<f64>,
    omega: Vec<f64>,
    pub spectrum: Vec<Complex64>,
}

impl SourceSpectrum {
    pub fn new(lambdas_nm: &[f64]) -> Self {
        SourceSpectrum {
            lambdas_nm: lambdas_nm.to_vec(),
            omega: lambdas_nm.iter().map(|&l| omega_from_lambda_nm(l)).collect(),
            spectrum: vec![Complex64::new(0.0, 0.0); lambdas_nm.len()],
        }
    }

    /// Record the current injected during the step that ended at time
    /// `t_after` (the current acts at the preceding half step).
    pub fn accumulate(&mut self, current: f64, t_after: f64, dt: f64) {
        if current == 0.0 {
            return;
        }
        let t_half = t_after - 0.5 * dt;
        for (s, &w) in self.spectrum.iter_mut().zip(&self.omega) {
            let (im, re) = (w * t_half).sin_cos();
            *s += Complex64::new(re * current * dt, im * current * dt);
        }
    }
}

/// Orientation of a rectangular monitor face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceNormal {
    XLo,
    XHi,
    YLo,
    YHi,
    ZLo,
    ZHi,
}

impl FaceNormal {
    /// Outward sign used when the face belongs to a closed box.
    fn outward_sign(self) -> f64 {
        match self {
            FaceNormal::XHi | FaceNormal::YHi | FaceNormal::ZHi => 1.0,
            _ => -1.0,
        }
    }
}

/// DFT accumulator over one rectangular face at a fixed node plane.
///
/// The tangential components are stored in a cyclic order such that the flux
/// along the +normal is S = Re(E1 conj(H2) - E2 conj(H1)) / 2 regardless of
/// the face orientation:
///
/// * normal z: (E1, E2, H1, H2) = (Ex, Ey, Hx, Hy)
/// * normal x: (Ey, Ez, Hy, Hz)
/// * normal y: (Ez, Ex, Hz, Hx)
#[derive(Debug, Clone)]
pub struct FaceDft {
    pub normal: FaceNormal,
    /// Node index along the normal axis.
    pub node: usize,
    /// Cell index ranges of the two transverse axes (a, b), half-open.
    pub a0: usize,
    pub a1: usize,
    pub b0: usize,
    pub b1: usize,
    lambdas_nm: Vec<f64>,
    omega: Vec<f64>,
    /// Accumulators, layout [lambda * npts + pt].
    e1: Vec<Complex64>,
    e2: Vec<Complex64>,
    h1: Vec<Complex64>,
    h2: Vec<Complex64>,
    scratch: Vec<f64>,
}

impl FaceDft {
    pub fn new(
        normal: FaceNormal,
        node: usize,
        a0: usize,
        a1: usize,
        b0: usize,
        b1: usize,
        lambdas_nm: &[f64],
    ) -> Self {
        assert!(a1 > a0 && b1 > b0, "empty monitor face");
        let npts = (a1 - a0) * (b1 - b0);
        let nl = lambdas_nm.len();
        FaceDft {
            normal,
            node,
            a0,
            a1,
            b0,
            b1,
            lambdas_nm: lambdas_nm.to_vec(),
            omega: lambdas_nm.iter().map(|&l| omega_from_lambda_nm(l)).collect(),
            e1: vec![Complex64::new(0.0, 0.0); nl * npts],
            e2: vec![Complex64::new(0.0, 0.0); nl * npts],
            h1: vec![Complex64::new(0.0, 0.0); nl * npts],
            h2: vec![Complex64::new(0.0, 0.0); nl * npts],
            scratch: vec![0.0; 4 * npts],
        }
    }

    pub fn npts(&self) -> usize {
        (self.a1 - self.a0) * (self.b1 - self.b0)
    }

    /// Sample the engine fields onto the face points (co-located averages)
    /// and fold them into the running transforms. Call once per step, after
    /// `Engine::step`.
    pub fn accumulate(&mut self, eng: &Engine) {
        let npts = self.npts();
        let t_e = eng.time();
        let dt = eng.dt();
        let t_h = t_e - 0.5 * dt;

        // Stage 1: gather co-located real field samples into scratch.
        {
            let g = eng.grid();
            let (sx, sy, sz) = g.strides();
            let n = self.node;
            let (s_e1, rest) = self.scratch.split_at_mut(npts);
            let (s_e2, rest) = rest.split_at_mut(npts);
            let (s_h1, s_h2) = rest.split_at_mut(npts);
            let (ex, ey, ez) = (
                eng.field(FieldComp::Ex),
                eng.field(FieldComp::Ey),
                eng.field(FieldComp::Ez),
            );
            let (hx, hy, hz) = (
                eng.field(FieldComp::Hx),
                eng.field(FieldComp::Hy),
                eng.field(FieldComp::Hz),
            );
            let mut p = 0usize;
            match self.normal {
                FaceNormal::ZLo | FaceNormal::ZHi => {
                    // Points (i+1/2, j+1/2) at node k = n; a = i cells, b = j cells.
                    for i in self.a0..self.a1 {
                        for j in self.b0..self.b1 {
                            let idx = g.idx(i, j, n);
                            s_e1[p] = 0.5 * (ex[idx] + ex[idx + sy]);
                            s_e2[p] = 0.5 * (ey[idx] + ey[idx + sx]);
                            s_h1[p] = 0.25 * (hx[idx] + hx[idx + sx] + hx[idx - sz] + hx[idx + sx - sz]);
                            s_h2[p] = 0.25 * (hy[idx] + hy[idx + sy] + hy[idx - sz] + hy[idx + sy - sz]);
                            p += 1;
                        }
                    }
                }
                FaceNormal::XLo | FaceNormal::XHi => {
                    // Points (j+1/2, k+1/2) at node i = n; a = j cells, b = k cells.
                    for j in self.a0..self.a1 {
                        for k in self.b0..self.b1 {
                            let idx = g.idx(n, j, k);
                            s_e1[p] = 0.5 * (ey[idx] + ey[idx + sz]);
                            s_e2[p] = 0.5 * (ez[idx] + ez[idx + sy]);
                            s_h1[p] = 0.25 * (hy[idx] + hy[idx + sy] + hy[idx - sx] + hy[idx + sy - sx]);
                            s_h2[p] = 0.25 * (hz[idx] + hz[idx + sz] + hz[idx - sx] + hz[idx + sz - sx]);
                            p += 1;
                        }
                    }
                }
                FaceNormal::YLo | FaceNormal::YHi => {
                    // Points (i+1/2, k+1/2) at node j = n; a = i cells, b = k cells.
                    for i in self.a0..self.a1 {
                        for k in self.b0..self.b1 {
                            let idx = g.idx(i, n, k);
                            s_e1[p] = 0.5 * (ez[idx] + ez[idx + sx]);
                            s_e2[p] = 0.5 * (ex[idx] + ex[idx + sz]);
                            s_h1[p] = 0.25 * (hz[idx] + hz[idx + sz] + hz[idx - sy] + hz[idx + sz - sy]);
                            s_h2[p] = 0.25 * (hx[idx] + hx[idx + sx] + hx[idx - sy] + hx[idx + sx - sy]);
                            p += 1;
                        }
                    }
                }
            }
        }

        // Stage 2: per wavelength, add scratch * exp(i omega t) * dt. The
        // lambda loop parallelizes without any cross-talk.
        let (s_e1, rest) = self.scratch.split_at(npts);
        let (s_e2, rest) = rest.split_at(npts);
        let (s_h1, s_h2) = rest.split_at(npts);
        let omega = &self.omega;
        self.e1
            .par_chunks_mut(npts)
            .zip(self.e2.par_chunks_mut(npts))
            .zip(self.h1.par_chunks_mut(npts).zip(self.h2.par_chunks_mut(npts)))
            .enumerate()
            .for_each(|(il, ((a_e1, a_e2), (a_h1, a_h2)))| {
                let w = omega[il];
                let (sin_e, cos_e) = (w * t_e).sin_cos();
                let (sin_h, cos_h) = (w * t_h).sin_cos();
                let pe = Complex64::new(cos_e * dt, sin_e * dt);
                let ph = Complex64::new(cos_h * dt, sin_h * dt);
                for p in 0..npts {
                    a_e1[p] += s_e1[p] * pe;
                    a_e2[p] += s_e2[p] * pe;
                    a_h1[p] += s_h1[p] * ph;
                    a_h2[p] += s_h2[p] * ph;
                }
            });
    }

    /// Normalize by the source spectrum (fields per unit current moment).
    pub fn normalize(&mut self, source: &SourceSpectrum) {
        assert_eq!(source.lambdas_nm.len(), self.lambdas_nm.len());
        let npts = self.npts();
        for (il, &s) in source.spectrum.iter().enumerate() {
            let inv = 1.0 / s;
            for arr in [&mut self.e1, &mut self.e2, &mut self.h1, &mut self.h2] {
                for v in &mut arr[il * npts..(il + 1) * npts] {
                    *v *= inv;
                }
            }
        }
    }

    /// Time-averaged power through the face along its outward normal, watts.
    pub fn outward_power(&self, delta: f64) -> PowerSpectrum {
        let npts = self.npts();
        let sign = self.normal.outward_sign();
        let da = delta * delta;
        let watts = (0..self.lambdas_nm.len())
            .map(|il| {
                let lo = il * npts;
                let hi = lo + npts;
                let mut s = 0.0;
                for p in lo..hi {
                    s += (self.e1[p] * self.h2[p].conj() - self.e2[p] * self.h1[p].conj()).re;
                }
                0.5 * s * da * sign
            })
            .collect();
        PowerSpectrum {
            lambdas_nm: self.lambdas_nm.clone(),
            watts,
        }
    }

    pub fn lambdas_nm(&self) -> &[f64] {
        &self.lambdas_nm
    }

    /// Raw accumulator access in the canonical tangential order.
    pub fn component(&self, which: usize) -> &[Complex64] {
        match which {
            0 => &self.e1,
            1 => &self.e2,
            2 => &self.h1,
            _ => &self.h2,
        }
    }

    pub fn component_mut(&mut self, which: usize) -> &mut [Complex64] {
        match which {
            0 => &mut self.e1,
            1 => &mut self.e2,
            2 => &mut self.h1,
            _ => &mut self.h2,
        }
    }
}

/// Closed rectangular box of six `FaceDft`s around a source, for total
/// radiated power. Cell ranges are half-open; the box spans cells
/// `[i0, i1) x [j0, j1) x [k0, k1)` with faces on the bounding node planes.
#[derive(Debug, Clone)]
pub struct BoxDft {
    pub faces: Vec<FaceDft>,
}

impl BoxDft {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        i0: usize,
        i1: usize,
        j0: usize,
        j1: usize,
        k0: usize,
        k1: usize,
        lambdas_nm: &[f64],
    ) -> Self {
        let faces = vec![
            FaceDft::new(FaceNormal::XLo, i0, j0, j1, k0, k1, lambdas_nm),
            FaceDft::new(FaceNormal::XHi, i1, j0, j1, k0, k1, lambdas_nm),
            FaceDft::new(FaceNormal::YLo, j0, i0, i1, k0, k1, lambdas_nm),
            FaceDft::new(FaceNormal::YHi, j1, i0, i1, k0, k1, lambdas_nm),
            FaceDft::new(FaceNormal::ZLo, k0, i0, i1, j0, j1, lambdas_nm),
            FaceDft::new(FaceNormal::ZHi, k1, i0, i1, j0, j1, lambdas_nm),
        ];
        BoxDft { faces }
    }

    pub fn accumulate(&mut self, eng: &Engine) {
        for f in &mut self.faces {
            f.accumulate(eng);
        }
    }

    pub fn normalize(&mut self, source: &SourceSpectrum) {
        for f in &mut self.faces {
            f.normalize(source);
        }
    }

    /// Net time-averaged power flowing out of the box.
    pub fn net_outward_power(&self, delta: f64) -> PowerSpectrum {
        let mut total = self.faces[0].outward_power(delta);
        for f in &self.faces[1..] {
            let p = f.outward_power(delta);
            for (t, v) in total.watts.iter_mut().zip(&p.watts) {
                *t += v;
            }
        }
        total
    }
}

/// Finalized complex field maps over a horizontal plane, per unit source
/// current moment: the hand-off format between the solver and all far-field
/// and fiber post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneRecord {
    pub lambdas_nm: Vec<f64>,
    /// Grid pitch in meters.
    pub delta_m: f64,
    /// Sample counts along x and y.
    pub nx: usize,
    pub ny: usize,
    /// Coordinates of the first sample relative to the device axis, meters.
    pub x0_m: f64,
    pub y0_m: f64,
    /// Height of the plane above its reference surface (for device runs, the
    /// membrane top), meters. Facet propagation heights are measured from
    /// that reference.
    pub z_above_ref_m: f64,
    /// Complex tangential fields, layout [lambda * (nx * ny) + iy * nx + ix].
    pub ex: Vec<Complex64>,
    pub ey: Vec<Complex64>,
    pub hx: Vec<Complex64>,
    pub hy: Vec<Complex64>,
    /// True if the run hit its step budget before reaching the decay target.
    pub not_decayed: bool,
}

impl PlaneRecord {
    /// Build from a finalized (normalized) z-normal face. `x0/y0` locate the
    /// face's first sample relative to the device axis.
    pub fn from_face(face: &FaceDft, delta_m: f64, x0_m: f64, y0_m: f64, z_above_ref_m: f64) -> Self {
        assert!(matches!(face.normal, FaceNormal::ZLo | FaceNormal::ZHi));
        let nx = face.a1 - face.a0;
        let ny = face.b1 - face.b0;
        let nl = face.lambdas_nm.len();
        let npts = nx * ny;
        // Face storage iterates a (=i) outer, b (=j) inner; transpose to the
        // row-major [iy][ix] layout used by the FFT post-processing.
        let transpose = |src: &[Complex64]| -> Vec<Complex64> {
            let mut dst = vec![Complex64::new(0.0, 0.0); nl * npts];
            for il in 0..nl {
                for ix in 0..nx {
                    for iy in 0..ny {
                        dst[il * npts + iy * nx + ix] = src[il * npts + ix * ny + iy];
                    }
                }
            }
            dst
        };
        PlaneRecord {
            lambdas_nm: face.lambdas_nm.clone(),
            delta_m,
            nx,
            ny,
            x0_m,
            y0_m,
            z_above_ref_m,
            ex: transpose(face.component(0)),
            ey: transpose(face.component(1)),
            hx: transpose(face.component(2)),
            hy: transpose(face.component(3)),
            not_decayed: false,
        }
    }

    pub fn npts(&self) -> usize {
        self.nx * self.ny
    }

    pub fn slice(&self, comp: FieldComp, il: usize) -> &[Complex64] {
        let npts = self.npts();
        let arr = match comp {
            FieldComp::Ex => &self.ex,
            FieldComp::Ey => &self.ey,
            FieldComp::Hx => &self.hx,
            FieldComp::Hy => &self.hy,
            _ => panic!("plane records store tangential components only"),
        };
        &arr[il * npts..(il + 1) * npts]
    }

    /// Upward (+z) time-averaged power through the plane, watts.
    pub fn upward_flux(&self) -> PowerSpectrum {
        let npts = self.npts();
        let da = self.delta_m * self.delta_m;
        let watts = (0..self.lambdas_nm.len())
            .map(|il| {
                let lo = il * npts;
                let mut s = 0.0;
                for p in 0..npts {
                    s += (self.ex[lo + p] * self.hy[lo + p].conj()
                        - self.ey[lo + p] * self.hx[lo + p].conj())
                    .re;
                }
                0.5 * s * da
            })
            .collect();
        PowerSpectrum {
            lambdas_nm: self.lambdas_nm.clone(),
            watts,
        }
    }

    /// Ratio of the strongest |E| on the plane boundary to the strongest |E|
    /// anywhere on the plane, at one wavelength. Large values mean the
    /// aperture truncates significant field and far-field results are
    /// suspect.
    pub fn edge_truncation_ratio(&self, il: usize) -> f64 {
        let npts = self.npts();
        let lo = il * npts;
        let mag = |p: usize| -> f64 {
            (self.ex[lo + p].norm_sqr() + self.ey[lo + p].norm_sqr()).sqrt()
        };
        let mut max_all = 0.0f64;
        let mut max_edge = 0.0f64;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let v = mag(iy * self.nx + ix);
                max_all = max_all.max(v);
                if ix == 0 || iy == 0 || ix == self.nx - 1 || iy == self.ny - 1 {
                    max_edge = max_edge.max(v);
                }
            }
        }
        if max_all > 0.0 {
            max_edge / max_all
        } else {
            0.0
        }
    }
}
