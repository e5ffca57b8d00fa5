//! Wave-physics checks of the time stepper: propagation speed against the
//! defined speed of light, PML reflection against a doubled-domain reference,
//! exact conservation of the discrete field energy in a sealed box, and the
//! frequency-domain Maxwell residual of the running transforms.

use cpcg::constants::{C0, ETA0, MU0, omega_from_lambda_nm};
use cpcg::engine::{Engine, FieldComp};
use cpcg::geometry::MaterialMap;
use num_complex::Complex64;

/// Fill the engine with a +z travelling pulse: Ex and Hy paired for one-way
/// launch, with a sin(pi y / Ly) transverse profile so the conductor side
/// walls are satisfied exactly (the profile is an eigenmode of the cross
/// section, so no wall transients appear). `z0`, `width` and `lambda` are in
/// cells. The H sheet is sampled half a cell and half a step off the E sheet,
/// matching its place in the leapfrog.
fn launch_z_pulse(eng: &mut Engine, z0: f64, width: f64, lambda: f64) {
    let g = eng.grid();
    let (ncx, ncy, ncz) = eng.cell_counts();
    let envelope = |z: f64| -> f64 {
        let u = z - z0;
        (-u * u / (2.0 * width * width)).exp() * (std::f64::consts::TAU * u / lambda).cos()
    };
    let c_cells_per_step = C0 * eng.dt() / eng.delta();
    let ky = std::f64::consts::PI / ncy as f64;
    for i in 0..ncx {
        for j in 1..ncy {
            let profile = (ky * j as f64).sin();
            for k in 1..ncz {
                let idx = g.idx(i, j, k);
                eng.field_mut(FieldComp::Ex)[idx] = profile * envelope(k as f64);
            }
        }
        for j in 0..=ncy {
            let profile = (ky * j as f64).sin();
            for k in 0..ncz {
                let idx = g.idx(i, j, k);
                // H lives at z = (k+1/2) and t = -dt/2; f(z - ct) there.
                let z_half = k as f64 + 0.5 + 0.5 * c_cells_per_step;
                eng.field_mut(FieldComp::Hy)[idx] = profile * envelope(z_half) / ETA0;
            }
        }
    }
    eng.clear_constrained_samples();
}

/// |Ex|^2-weighted centroid of the pulse along z, in cells.
fn pulse_centroid(eng: &Engine) -> f64 {
    let g = eng.grid();
    let (_, ncy, ncz) = eng.cell_counts();
    let ex = eng.field(FieldComp::Ex);
    let i0 = 1usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=ncz {
        let mut w = 0.0;
        for j in 0..=ncy {
            let v = ex[g.idx(i0, j, k)];
            w += v * v;
        }
        num += k as f64 * w;
        den += w;
    }
    num / den
}

#[test]
fn pulse_speed_matches_the_discrete_dispersion_relation() {
    // 20 cells per wavelength; the wide cross section keeps the transverse
    // wavenumber of the launched mode tiny. The pulse centroid moves at the
    // scheme's group velocity, which the discrete dispersion relation
    //   sin^2(w dt/2) = S^2 [sin^2(kz d/2) + sin^2(ky d/2)],  S = c dt / d
    // predicts exactly; at this sampling the group deficit is about 1.1%
    // while the phase-velocity deficit stays under 1%. Both are asserted:
    // the measured speed against the analytic group velocity (tight), and
    // the analytic phase speed against c (the accuracy floor at 20
    // samples/lambda).
    let map = MaterialMap::uniform(3, 256, 420, 77.5, 1.0);
    let mut eng = Engine::new(&map, [0; 6]);
    let lambda_cells = 20.0;
    launch_z_pulse(&mut eng, 90.0, 18.0, lambda_cells);

    let settle = 60;
    for _ in 0..settle {
        eng.step(0.0);
    }
    let c1 = pulse_centroid(&eng);
    let t1 = eng.time();
    let travel = 600;
    for _ in 0..travel {
        eng.step(0.0);
    }
    let c2 = pulse_centroid(&eng);
    let t2 = eng.time();
    let speed = (c2 - c1) * eng.delta() / (t2 - t1);

    // Analytic prediction for the launched (kz, ky) at the carrier.
    let s = C0 * eng.dt() / eng.delta();
    let kz_half = std::f64::consts::PI / lambda_cells;
    let ky_half = std::f64::consts::PI / (2.0 * 256.0);
    let sin_w = s * (kz_half.sin().powi(2) + ky_half.sin().powi(2)).sqrt();
    let w = sin_w.asin();
    let group = C0 * s * kz_half.sin() * kz_half.cos() / (sin_w * w.cos());
    let phase = C0 * w / (kz_half * s);

    let err_vs_theory = (speed - group).abs() / C0;
    assert!(
        err_vs_theory < 0.003,
        "centroid speed {speed:.5e} m/s vs dispersion-relation group velocity {group:.5e} \
         (off by {:.3}% of c)",
        err_vs_theory * 100.0
    );
    assert!(
        (phase - C0).abs() / C0 < 0.01,
        "phase speed off c by {:.3}% at 20 samples/lambda",
        (phase - C0).abs() / C0 * 100.0
    );
    // And the pulse went the right way at roughly c.
    assert!(c2 > c1 + 100.0);
    assert!((speed - C0).abs() / C0 < 0.02);
}

#[test]
fn pml_echo_is_below_minus_60_db() {
    // Identical launches in a short domain (PML at z = 360 cells) and a
    // doubled domain (PML at 760). The probe sees identical fields until the
    // short domain's PML echo arrives, so the difference through the full
    // window is exactly the echo. -60 dB is a field-amplitude ratio of 1e-3.
    let probe_k = 300usize;
    let steps = 1400usize;
    let record = |ncz: usize| -> Vec<f64> {
        let map = MaterialMap::uniform(3, 64, ncz, 77.5, 1.0);
        let mut eng = Engine::new(&map, [0, 0, 0, 0, 0, 10]);
        launch_z_pulse(&mut eng, 100.0, 14.0, 20.0);
        let g = eng.grid();
        let (_, ncy, _) = eng.cell_counts();
        let idx = g.idx(1, ncy / 2, probe_k);
        (0..steps)
            .map(|_| {
                eng.step(0.0);
                eng.field(FieldComp::Ex)[idx]
            })
            .collect()
    };
    let near = record(360);
    let far = record(760);

    let incident = far.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let echo = near
        .iter()
        .zip(&far)
        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
    assert!(incident > 0.1, "incident pulse never reached the probe");
    let db = 20.0 * (echo / incident).log10();
    assert!(
        db < -60.0,
        "PML echo {db:.1} dB (amplitude ratio {:.2e})",
        echo / incident
    );
}

#[test]
fn sealed_box_conserves_the_staggered_energy_exactly() {
    // The leapfrog conserves U = (1/2) sum eps E(n)^2 + (1/2) mu0 sum
    // H(n-1/2) . H(n+1/2) exactly in a lossless sealed domain; only rounding
    // noise remains. This pins the update ranges and both curl adjoints.
    use rand::{Rng, SeedableRng};
    let map = MaterialMap::uniform(10, 10, 10, 40.0, 1.0);
    let mut eng = Engine::new(&map, [0; 6]);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let n = eng.grid().len();
    for comp in [
        FieldComp::Ex,
        FieldComp::Ey,
        FieldComp::Ez,
        FieldComp::Hx,
        FieldComp::Hy,
        FieldComp::Hz,
    ] {
        let scale = match comp {
            FieldComp::Ex | FieldComp::Ey | FieldComp::Ez => 1.0,
            _ => 1.0 / ETA0,
        };
        let f = eng.field_mut(comp);
        for idx in 0..n {
            f[idx] = rng.gen_range(-scale..scale);
        }
    }
    eng.clear_constrained_samples();

    let vol = eng.delta().powi(3);
    let eps_scale = eng.dt() / eng.delta();
    let staggered_energy = |now: &Engine| -> f64 {
        let mut later = now.clone();
        later.step(0.0);
        let mut u = 0.0;
        for comp in [FieldComp::Ex, FieldComp::Ey, FieldComp::Ez] {
            let f = now.field(comp);
            let ce = now.ce(comp);
            for idx in 0..f.len() {
                if ce[idx] > 0.0 {
                    u += 0.5 * (eps_scale / ce[idx]) * f[idx] * f[idx];
                }
            }
        }
        for comp in [FieldComp::Hx, FieldComp::Hy, FieldComp::Hz] {
            let before = now.field(comp);
            let after = later.field(comp);
            for idx in 0..before.len() {
                u += 0.5 * MU0 * before[idx] * after[idx];
            }
        }
        u * vol
    };

    let u0 = staggered_energy(&eng);
    assert!(u0 > 0.0);
    for step in 0..100 {
        eng.step(0.0);
        let u = staggered_energy(&eng);
        let drift = (u - u0).abs() / u0;
        assert!(
            drift < 1e-10,
            "energy drifted {drift:.2e} relative by step {step}"
        );
    }
}

#[test]
fn monitor_fields_satisfy_frequency_domain_maxwell() {
    // Drive a vacuum domain with a broadband dipole, Fourier-transform E and
    // H over a small probe volume at 1550 nm (20 samples per wavelength),
    // and check Faraday's law in the frequency domain: curl E = i omega mu0 H
    // with the discrete curl on the Yee lattice. Everything about sign
    // conventions, half-step timing and co-location has to be right at once
    // for this to hold.
    use cpcg::engine::source::{dipole_taps, GaussianPulse};

    let nc = 40usize;
    let delta_nm = 77.5;
    let map = MaterialMap::uniform(nc, nc, nc, delta_nm, 1.0);
    let mut eng = Engine::new(&map, [10; 6]);
    let delta = eng.delta();
    let mid = nc as f64 / 2.0;
    let pos = [mid * delta, mid * delta, (mid + 0.5) * delta];
    eng.set_taps(dipole_taps(eng.grid(), delta, pos, [0.0, 0.0, 1.0]));

    let pulse = GaussianPulse::for_band(1550.0, 1450.0, 1650.0);
    let lambda_nm = 1550.0;
    let omega = omega_from_lambda_nm(lambda_nm);

    // Probe volume nodes [lo, hi); curls need one extra sample beyond.
    let lo = 24usize;
    let hi = 29usize;
    let g = eng.grid();
    let span = hi - lo + 1;
    let vol_len = span * span * span;
    let mut dft = vec![[Complex64::new(0.0, 0.0); 6]; vol_len];
    let vidx = |i: usize, j: usize, k: usize| ((i - lo) * span + (j - lo)) * span + (k - lo);

    let steps = 3600usize;
    for _ in 0..steps {
        let t_half = eng.time() + 0.5 * eng.dt();
        eng.step(pulse.current(t_half));
        let t_e = eng.time();
        let t_h = t_e - 0.5 * eng.dt();
        let pe = Complex64::new(0.0, omega * t_e).exp() * eng.dt();
        let ph = Complex64::new(0.0, omega * t_h).exp() * eng.dt();
        for (c, comp) in [
            FieldComp::Ex,
            FieldComp::Ey,
            FieldComp::Ez,
            FieldComp::Hx,
            FieldComp::Hy,
            FieldComp::Hz,
        ]
        .into_iter()
        .enumerate()
        {
            let phase = if c < 3 { pe } else { ph };
            let f = eng.field(comp);
            for i in lo..=hi {
                for j in lo..=hi {
                    for k in lo..=hi {
                        dft[vidx(i, j, k)][c] += f[g.idx(i, j, k)] * phase;
                    }
                }
            }
        }
    }
    assert!(!eng.has_nonfinite());

    // Discrete curl of E at the H sample points, compared to i omega mu0 H.
    let inv_d = 1.0 / delta;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in lo..hi {
        for j in lo..hi {
            for k in lo..hi {
                let at = |ii: usize, jj: usize, kk: usize, c: usize| dft[vidx(ii, jj, kk)][c];
                // (curl E)_x at (i, j+1/2, k+1/2) vs Hx there.
                let curl_x = (at(i, j + 1, k, 2) - at(i, j, k, 2)) * inv_d
                    - (at(i, j, k + 1, 1) - at(i, j, k, 1)) * inv_d;
                // (curl E)_y at (i+1/2, j, k+1/2) vs Hy.
                let curl_y = (at(i, j, k + 1, 0) - at(i, j, k, 0)) * inv_d
                    - (at(i + 1, j, k, 2) - at(i, j, k, 2)) * inv_d;
                // (curl E)_z at (i+1/2, j+1/2, k) vs Hz.
                let curl_z = (at(i + 1, j, k, 1) - at(i, j, k, 1)) * inv_d
                    - (at(i, j + 1, k, 0) - at(i, j, k, 0)) * inv_d;
                for (curl, c) in [(curl_x, 3), (curl_y, 4), (curl_z, 5)] {
                    let target = Complex64::new(0.0, omega * MU0) * at(i, j, k, c);
                    num += (curl - target).norm_sqr();
                    den += target.norm_sqr();
                }
            }
        }
    }
    let residual = (num / den).sqrt();
    assert!(den > 0.0, "no field reached the probe volume");
    assert!(
        residual < 0.01,
        "frequency-domain Faraday residual {:.3}% exceeds 1%",
        residual * 100.0
    );
}
