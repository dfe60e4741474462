//! Backscattered-light noise toolkit for quantum-noise-limited
//! interferometric readout.
//!
//! Backscatter — carrier light that leaves the readout chain, reflects off
//! a moving surface and comes back — beats against the carrier on the
//! readout photodetector and contaminates the spectrum. This crate models
//! that coupling end to end:
//!
//! * [`model`] — detected power, the split large/small-displacement RIN
//!   terms, quantum-noise RIN and the backscatter-to-quantum-noise ratio.
//! * [`synth`] — seeded synthesis of contaminated photodetector series
//!   under shelf (fringe-wrapping) and small-motion drives.
//! * [`spectral`] — Welch ASD estimation, the analytic Bessel shelf model,
//!   accelerometer-to-displacement conversion.
//! * [`estimate`] — shelf fits for the backscatter-to-carrier ratio,
//!   absolute power inference, driven-to-background scaling, linearity
//!   checks.
//! * [`opo`] — OPO backscatter reflectivity and crystal BSDF budget with
//!   mitigation what-ifs.
//! * [`projection`] — requirement curves relative to quantum noise and
//!   isolation-deficit reports.
//! * [`io`] — CSV/JSON artifact formats with lossless float text.

// Comparisons are written `!(x > 0.0)` on purpose: they reject NaN along
// with the out-of-range value.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod opo;
pub mod projection;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use estimate::{
    fit_shelf, infer_backscatter_power, linearity_check, scale_background, LinearityReport,
    LinearityRun, PowerEstimate, ShelfFitResult,
};
pub use model::{
    backscatter_qn_ratio, detected_power, phase_from_displacement, quantum_noise_rin,
    rin_backscatter, BackscatterRin, CarrierState, PhysicalConstants, ScatterPath,
};
pub use opo::{
    cavity_scatter_gain, infer_bsdf, mitigation_whatif, r_opo_from_powers, scatter_budget,
    solid_angle, BudgetMeasurements, Measured, OpoParams, ScatterBudget,
};
pub use projection::{
    bundled_background_points, isolation_deficit, project_backscatter, requirement_curve,
    BackgroundPoint, MarginReport, RelQnSpectrum, RequirementConfig,
};
pub use spectral::{
    accel_to_displacement, estimate_motion_spectrum, estimate_rin_spectrum, shelf_model_asd,
    MotionSpectrum, RinSpectrum,
};
pub use synth::{
    synthesize_displacement, synthesize_shelf_drive, synthesize_small_motion, DriveConfig,
    DriveKind, ShotNoise, TimeSeries,
};
