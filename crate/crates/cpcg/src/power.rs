//! Power spectra and the emission figures of merit derived from them.
//!
//! All monitor records are normalized per unit source current moment, so a
//! flux integral over normalized fields has units of watts per square
//! ampere-meter. Ratios of such powers (Purcell factor, extraction
//! efficiency) are independent of the drive entirely — the same device run
//! gives the same ratios no matter what pulse excited it.

use serde::{Deserialize, Serialize};

use crate::constants::{ETA0, wavenumber_from_lambda_nm};

/// Power vs wavelength, watts per unit squared source current moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub lambdas_nm: Vec<f64>,
    pub watts: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(lambdas_nm: Vec<f64>, watts: Vec<f64>) -> Self {
        assert_eq!(lambdas_nm.len(), watts.len());
        PowerSpectrum { lambdas_nm, watts }
    }

    pub fn len(&self) -> usize {
        self.lambdas_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas_nm.is_empty()
    }
}

/// Dimensionless quantity vs wavelength (Purcell factor, efficiencies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambdas_nm: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(lambdas_nm: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(lambdas_nm.len(), values.len());
        Spectrum { lambdas_nm, values }
    }

    /// Value of the largest sample and its wavelength.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = (self.lambdas_nm[0], self.values[0]);
        for (&l, &v) in self.lambdas_nm.iter().zip(&self.values) {
            if v > best.1 {
                best = (l, v);
            }
        }
        best
    }
}

/// Radiated power of a point current source in an infinite homogeneous
/// non-magnetic medium of refractive index `n`, per unit squared current
/// moment: P = n eta0 k0^2 / (12 pi) with k0 the vacuum wavenumber. This is
/// the denominator of every Purcell factor.
pub fn homogeneous_dipole_power(n: f64, lambda_nm: f64) -> f64 {
    let k0 = wavenumber_from_lambda_nm(lambda_nm);
    n * ETA0 * k0 * k0 / (12.0 * std::f64::consts::PI)
}

/// Purcell spectrum: radiated power relative to the same emitter embedded in
/// bulk material of index `n_bulk`.
pub fn purcell_spectrum(p_rad: &PowerSpectrum, n_bulk: f64) -> Spectrum {
    let values = p_rad
        .lambdas_nm
        .iter()
        .zip(&p_rad.watts)
        .map(|(&l, &p)| p / homogeneous_dipole_power(n_bulk, l))
        .collect();
    Spectrum::new(p_rad.lambdas_nm.clone(), values)
}

/// Fraction of the radiated power crossing the collection plane upward.
/// Wherever the radiated power underflows (no emission at that wavelength,
/// e.g. outside the source band before normalization), the ratio is reported
/// as zero rather than NaN.
pub fn extraction_efficiency(p_up: &PowerSpectrum, p_rad: &PowerSpectrum) -> Spectrum {
    assert_eq!(p_up.lambdas_nm, p_rad.lambdas_nm, "mismatched spectra");
    let floor = 1e-300;
    let values = p_up
        .watts
        .iter()
        .zip(&p_rad.watts)
        .map(|(&up, &rad)| if rad.abs() > floor { up / rad } else { 0.0 })
        .collect();
    Spectrum::new(p_up.lambdas_nm.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bulk_dipole_power_matches_the_frozen_value() {
        // Hand-evaluated n eta0 k^2 / (12 pi) at 1550 nm.
        assert_relative_eq!(
            homogeneous_dipole_power(3.135, 1550.0),
            5.14793831078104e14,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            homogeneous_dipole_power(1.0, 1550.0),
            1.64208558557609e14,
            max_relative = 1e-9
        );
    }

    #[test]
    fn bulk_dipole_power_agrees_with_the_dipole_moment_form() {
        // Independent formulation: P = n mu0 omega^2 / (12 pi c) per unit
        // (I dl)^2, using I dl = -i omega p. Both forms must agree.
        use crate::constants::{C0, MU0, omega_from_lambda_nm};
        for &(n, l) in &[(1.0, 1450.0), (3.135, 1550.0), (1.443, 1650.0)] {
            let w = omega_from_lambda_nm(l);
            let alt = n * MU0 * w * w / (12.0 * std::f64::consts::PI * C0);
            assert_relative_eq!(homogeneous_dipole_power(n, l), alt, max_relative = 1e-10);
        }
    }

    #[test]
    fn bulk_dipole_power_scales_as_index_over_lambda_squared() {
        let p = homogeneous_dipole_power(2.0, 1550.0);
        assert_relative_eq!(homogeneous_dipole_power(4.0, 1550.0), 2.0 * p, max_relative = 1e-12);
        assert_relative_eq!(
            homogeneous_dipole_power(2.0, 3100.0),
            0.25 * p,
            max_relative = 1e-12
        );
    }

    #[test]
    fn purcell_of_the_reference_bulk_power_is_unity() {
        let lambdas = vec![1450.0, 1550.0, 1650.0];
        let watts = lambdas
            .iter()
            .map(|&l| homogeneous_dipole_power(3.135, l))
            .collect();
        let fp = purcell_spectrum(&PowerSpectrum::new(lambdas, watts), 3.135);
        for v in fp.values {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn extraction_handles_zero_denominators() {
        let l = vec![1500.0, 1600.0];
        let up = PowerSpectrum::new(l.clone(), vec![0.3, 0.0]);
        let rad = PowerSpectrum::new(l, vec![0.6, 0.0]);
        let eta = extraction_efficiency(&up, &rad);
        assert_relative_eq!(eta.values[0], 0.5);
        assert_eq!(eta.values[1], 0.0);
    }

    #[test]
    fn peak_returns_wavelength_and_value() {
        let s = Spectrum::new(vec![1500.0, 1550.0, 1600.0], vec![1.0, 7.0, 2.0]);
        assert_eq!(s.peak(), (1550.0, 7.0));
    }
}
