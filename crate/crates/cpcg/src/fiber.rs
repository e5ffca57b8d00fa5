//! Fiber-facet field propagation and mode-overlap coupling.
//!
//! The monitored plane field is carried upward to a candidate fiber facet by
//! the angular-spectrum method: Fourier decompose, advance every plane-wave
//! component by its propagation phase over the height h (evanescent
//! components decay), reassemble. The facet field is then compared against
//! the fiber's fundamental mode, approximated as the usual Gaussian with
//! 1/e-amplitude radius equal to half the mode-field diameter, through the
//! standard overlap integral. The overlap is evaluated over a square of side
//! ten standard deviations of the mode so that results do not depend on how
//! much empty grid surrounds the beam.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::constants::wavenumber_from_lambda_nm;
use crate::engine::monitor::PlaneRecord;
use crate::power::Spectrum;

/// A named fiber, characterized by its mode-field diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpec {
    pub name: String,
    pub mfd_um: f64,
}

impl FiberSpec {
    /// 1/e amplitude radius of the Gaussian mode, meters (MFD / 2).
    pub fn mode_radius_m(&self) -> f64 {
        0.5 * self.mfd_um * 1e-6
    }

    /// Built-in presets; the same names ship in the editable fiber table.
    pub fn preset(name: &str) -> Option<FiberSpec> {
        let mfd_um = match name {
            "SMF-28" => 10.4,
            "980-HP" => 6.8,
            _ => return None,
        };
        Some(FiberSpec {
            name: name.to_string(),
            mfd_um,
        })
    }
}

/// Parse a fiber table in `name,MFD_um` form. Blank lines and `#` comments
/// are ignored; a header line reading `name,MFD_um` is skipped.
pub fn parse_fiber_table(text: &str) -> Result<Vec<FiberSpec>, String> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let name = parts.next().unwrap_or_default();
        let mfd = parts.next().unwrap_or_default();
        if out.is_empty() && mfd.eq_ignore_ascii_case("MFD_um") {
            continue;
        }
        let mfd_um: f64 = mfd
            .parse()
            .map_err(|_| format!("line {}: bad MFD value {mfd:?}", ln + 1))?;
        if name.is_empty() || !mfd_um.is_finite() || mfd_um <= 0.0 {
            return Err(format!("line {}: invalid fiber entry {line:?}", ln + 1));
        }
        out.push(FiberSpec {
            name: name.to_string(),
            mfd_um,
        });
    }
    Ok(out)
}

/// Complex transverse field sampled on a uniform grid at some height above
/// the device; both polarizations, layout [iy * n + ix].
#[derive(Debug, Clone)]
pub struct FacetField {
    pub lambda_nm: f64,
    pub height_m: f64,
    pub n: usize,
    pub delta_m: f64,
    /// Coordinates of sample (0, 0); the device axis is at x = y = 0.
    pub x0_m: f64,
    pub y0_m: f64,
    pub ex: Vec<Complex64>,
    pub ey: Vec<Complex64>,
}

impl FacetField {
    pub fn x_m(&self, ix: usize) -> f64 {
        self.x0_m + ix as f64 * self.delta_m
    }

    pub fn y_m(&self, iy: usize) -> f64 {
        self.y0_m + iy as f64 * self.delta_m
    }

    /// Sum of |E|^2 over the grid times the cell area; the quantity the
    /// angular-spectrum step conserves for propagating content.
    pub fn power_measure(&self) -> f64 {
        let s: f64 = self
            .ex
            .iter()
            .zip(&self.ey)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        s * self.delta_m * self.delta_m
    }
}

/// The Fourier decomposition of one wavelength slice of a recorded plane,
/// cached so that fields at many heights cost one synthesis FFT each.
pub struct AngularSpectrum {
    lambda_nm: f64,
    n: usize,
    delta_m: f64,
    x0_m: f64,
    y0_m: f64,
    sx: Vec<Complex64>,
    sy: Vec<Complex64>,
}

impl AngularSpectrum {
    /// Decompose the plane record, zero-padded to at least `pad_min` per
    /// axis with the data centered (the device beam must have decayed by
    /// the plane edge; wrap-around from the padding is then negligible).
    pub fn from_plane(rec: &PlaneRecord, il: usize, pad_min: usize) -> AngularSpectrum {
        let n = pad_min.max((2 * rec.nx.max(rec.ny)).next_power_of_two());
        let ox = (n - rec.nx) / 2;
        let oy = (n - rec.ny) / 2;
        let npts = rec.nx * rec.ny;

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n);
        let decompose = |src: &[Complex64]| -> Vec<Complex64> {
            let mut a = vec![Complex64::new(0.0, 0.0); n * n];
            for iy in 0..rec.ny {
                let dst = (oy + iy) * n + ox;
                let s = il * npts + iy * rec.nx;
                a[dst..dst + rec.nx].copy_from_slice(&src[s..s + rec.nx]);
            }
            for row in a.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = a[r * n + c];
                }
                fft.process(&mut col);
                for r in 0..n {
                    a[r * n + c] = col[r];
                }
            }
            a
        };

        AngularSpectrum {
            lambda_nm: rec.lambdas_nm[il],
            n,
            delta_m: rec.delta_m,
            x0_m: rec.x0_m - ox as f64 * rec.delta_m,
            y0_m: rec.y0_m - oy as f64 * rec.delta_m,
            sx: decompose(&rec.ex),
            sy: decompose(&rec.ey),
        }
    }

    pub fn lambda_nm(&self) -> f64 {
        self.lambda_nm
    }

    /// Grid half-span of the synthesized facet field, meters.
    pub fn half_span_m(&self) -> f64 {
        0.5 * self.n as f64 * self.delta_m
    }

    /// Synthesize the field at height h above the recorded plane. Each
    /// plane-wave component advances by its propagation phase; components
    /// beyond the light circle decay as exp(-|k_z| h).
    pub fn at_height(&self, h_m: f64) -> FacetField {
        assert!(h_m >= 0.0, "propagation height must be non-negative");
        let n = self.n;
        let k = wavenumber_from_lambda_nm(self.lambda_nm);
        let dk = std::f64::consts::TAU / (n as f64 * self.delta_m);
        let signed = |m: usize| -> f64 {
            if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            }
        };
        let mut factor = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            let ky = dk * signed(r);
            for c in 0..n {
                let kx = dk * signed(c);
                let kt2 = kx * kx + ky * ky;
                factor[r * n + c] = if kt2 <= k * k {
                    // e^{+i omega t} time convention: an outgoing component
                    // accumulates phase -k_z h moving up.
                    Complex64::new(0.0, -(k * k - kt2).sqrt() * h_m).exp()
                } else {
                    Complex64::new((-(kt2 - k * k).sqrt() * h_m).exp(), 0.0)
                };
            }
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let synthesize = |spec: &[Complex64]| -> Vec<Complex64> {
            let mut a: Vec<Complex64> = spec
                .iter()
                .zip(&factor)
                .map(|(s, f)| s * f)
                .collect();
            for row in a.chunks_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = a[r * n + c];
                }
                fft.process(&mut col);
                for r in 0..n {
                    a[r * n + c] = col[r];
                }
            }
            let norm = 1.0 / (n * n) as f64;
            for v in a.iter_mut() {
                *v *= norm;
            }
            a
        };

        FacetField {
            lambda_nm: self.lambda_nm,
            height_m: h_m,
            n,
            delta_m: self.delta_m,
            x0_m: self.x0_m,
            y0_m: self.y0_m,
            ex: synthesize(&self.sx),
            ey: synthesize(&self.sy),
        }
    }
}

/// Angular-spectrum propagation of one wavelength slice to height h.
pub fn propagate_to_plane(
    rec: &PlaneRecord,
    il: usize,
    h_m: f64,
    pad_min: usize,
) -> FacetField {
    AngularSpectrum::from_plane(rec, il, pad_min).at_height(h_m)
}

/// The Gaussian fundamental mode exp(-r^2/w^2) of the given fiber on the
/// facet grid, amplitude 1 on axis (normalization lives in the overlap).
/// Rejects grids that cannot hold the ten-standard-deviation overlap square
/// (sigma = w/sqrt(2)).
pub fn gaussian_fiber_mode(fiber: &FiberSpec, facet: &FacetField) -> Result<FacetField, String> {
    check_mode_span(fiber, facet)?;
    let w = fiber.mode_radius_m();
    let n = facet.n;
    let mut ex = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..n {
        let y = facet.y_m(iy);
        for ix in 0..n {
            let x = facet.x_m(ix);
            ex[iy * n + ix] = Complex64::new((-(x * x + y * y) / (w * w)).exp(), 0.0);
        }
    }
    Ok(FacetField {
        lambda_nm: facet.lambda_nm,
        height_m: facet.height_m,
        n,
        delta_m: facet.delta_m,
        x0_m: facet.x0_m,
        y0_m: facet.y0_m,
        ex,
        ey: vec![Complex64::new(0.0, 0.0); n * n],
    })
}

/// Half-side of the overlap square: five standard deviations of the mode.
fn overlap_half_side_m(fiber: &FiberSpec) -> f64 {
    5.0 * fiber.mode_radius_m() / std::f64::consts::SQRT_2
}

fn check_mode_span(fiber: &FiberSpec, facet: &FacetField) -> Result<(), String> {
    let need = overlap_half_side_m(fiber);
    let have_x = (-facet.x0_m).min(facet.x_m(facet.n - 1));
    let have_y = (-facet.y0_m).min(facet.y_m(facet.n - 1));
    if have_x < need || have_y < need {
        return Err(format!(
            "facet grid spans {:.1} x {:.1} um from the axis but the overlap \
             square needs {:.1} um (10 sigma of the {} mode)",
            have_x * 1e6,
            have_y * 1e6,
            need * 1e6,
            fiber.name
        ));
    }
    Ok(())
}

/// Mode-coupling efficiency between a facet field and a fiber's Gaussian
/// mode: the scalar overlap |integral E M*|^2 / (integral |E|^2 integral
/// |M|^2) over the mode's ten-standard-deviation square. The fiber mode is
/// scalar; the two facet polarizations are overlapped separately and
/// combined weighted by their power, which reduces to the plain scalar
/// formula whenever one polarization dominates.
pub fn mode_coupling_efficiency(facet: &FacetField, fiber: &FiberSpec) -> Result<f64, String> {
    check_mode_span(fiber, facet)?;
    let w = fiber.mode_radius_m();
    let half = overlap_half_side_m(fiber);
    let n = facet.n;

    let mut cross_x = Complex64::new(0.0, 0.0);
    let mut cross_y = Complex64::new(0.0, 0.0);
    let mut pow_e = 0.0;
    let mut pow_m = 0.0;
    for iy in 0..n {
        let y = facet.y_m(iy);
        if y.abs() > half {
            continue;
        }
        for ix in 0..n {
            let x = facet.x_m(ix);
            if x.abs() > half {
                continue;
            }
            let m = (-(x * x + y * y) / (w * w)).exp();
            let idx = iy * n + ix;
            cross_x += facet.ex[idx] * m;
            cross_y += facet.ey[idx] * m;
            pow_e += facet.ex[idx].norm_sqr() + facet.ey[idx].norm_sqr();
            pow_m += m * m;
        }
    }
    if pow_e <= 0.0 || pow_m <= 0.0 {
        return Ok(0.0);
    }
    Ok((cross_x.norm_sqr() + cross_y.norm_sqr()) / (pow_e * pow_m))
}

/// Fiber-coupled efficiency spectrum: the product of the extraction
/// efficiency and the mode-coupling efficiency, per wavelength.
pub fn smf_coupling_efficiency(
    eta_ext: &Spectrum,
    eta_mc: &Spectrum,
) -> Result<Spectrum, String> {
    if eta_ext.lambdas_nm != eta_mc.lambdas_nm {
        return Err("efficiency spectra are on different wavelength axes".into());
    }
    Ok(Spectrum {
        lambdas_nm: eta_ext.lambdas_nm.clone(),
        values: eta_ext
            .values
            .iter()
            .zip(&eta_mc.values)
            .map(|(a, b)| a * b)
            .collect(),
    })
}

/// Search result of the facet-height optimization.
#[derive(Debug, Clone, Copy)]
pub struct OptimalHeight {
    pub h_m: f64,
    pub eta_mc: f64,
}

/// Find the facet height in [0, h_max] maximizing the mode-coupling
/// efficiency: a coarse scan brackets the peak, golden-section refines it.
/// Deterministic; resolution ~10 nm in h.
pub fn optimal_height(
    spectrum: &AngularSpectrum,
    fiber: &FiberSpec,
    h_max_m: f64,
) -> Result<OptimalHeight, String> {
    let eval = |h: f64| -> Result<f64, String> {
        mode_coupling_efficiency(&spectrum.at_height(h), fiber)
    };
    // Coarse scan, 0.5 um pitch.
    let n_scan = ((h_max_m / 0.5e-6).ceil() as usize).max(2);
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    let scan_h = |i: usize| i as f64 * h_max_m / n_scan as f64;
    for i in 0..=n_scan {
        let v = eval(scan_h(i))?;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = scan_h(best_i.saturating_sub(1));
    let mut b = scan_h((best_i + 1).min(n_scan));
    // Golden-section on the bracket.
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > 1e-8 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let h = 0.5 * (a + b);
    Ok(OptimalHeight {
        h_m: h,
        eta_mc: eval(h)?,
    })
}
