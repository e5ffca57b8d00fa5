//! Design and analysis toolkit for circular photonic crystal grating (CPCG)
//! cavities: mirror-backed InP membranes patterned with sunflower-style hole
//! rings that funnel quantum-dot emission into a narrow vertical beam.
//!
//! The crate bundles
//! * a 3D finite-difference time-domain (FDTD) Maxwell solver on a Yee grid
//!   with convolutional PML absorbers and perfect-conductor mirrors,
//! * broadband dipole excitation with running discrete Fourier transform
//!   monitors (one run yields full spectra),
//! * radiated/upward power bookkeeping: Purcell enhancement, extraction and
//!   collection efficiencies,
//! * near-field to far-field transformation and angular-spectrum propagation
//!   to a fiber facet, with overlap integrals against Gaussian fiber modes,
//! * a parameter-sweep harness with crash-safe resumable output tables,
//! * the `cpcg` command-line front end.
//!
//! Everything downstream of the solver is pure post-processing on recorded
//! monitor data, so far fields, fiber coupling and height scans never require
//! re-running the time stepping.

pub mod constants;
pub mod engine;
pub mod farfield;
pub mod fiber;
pub mod geometry;
pub mod config;
pub mod output;
pub mod power;
pub mod report;
pub mod sim;
pub mod sweep;
pub mod validate;
