//! OPO backscatter reflectivity and crystal BSDF budget.
//!
//! The backscatter reflectivity of the OPO is the ratio of the power it
//! reflects back toward the readout to the spurious power incident on it,
//! corrected for measurement efficiency and mode matching. Inverting the
//! cavity buildup expression
//!
//! ```text
//! R_OPO = BSDF * 16 Omega / (1 - R_in)^2
//!              * (1 - 2 x cos(theta_sc) + x^2) / (1 - x^2)^2
//! ```
//!
//! then attributes that reflectivity to the nonlinear crystal's scatter
//! strength per steradian. The pump-relative phase of the circulating
//! scatter is not measurable in practice; `theta_sc = 0` minimizes the
//! parametric factor and therefore bounds the BSDF from above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpoParams {
    /// Input coupler power reflectivity R_in, in (0, 1).
    pub input_coupler_reflectivity: f64,
    /// Intra-cavity beam waist at the crystal, m.
    pub waist_m: f64,
    /// Normalized parametric interaction strength x, in [0, 1) below
    /// threshold.
    pub interaction_strength: f64,
    /// Relative phase between circulating scatter and the pump field, rad.
    /// Zero gives the most conservative (largest) inferred BSDF.
    pub pump_relative_phase_rad: f64,
    /// Carrier wavelength, m.
    pub wavelength_m: f64,
}

impl OpoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.input_coupler_reflectivity > 0.0 && self.input_coupler_reflectivity < 1.0) {
            return Err(Error::invalid(
                "input_coupler_reflectivity",
                "must lie in (0, 1)",
            ));
        }
        if !(self.waist_m > 0.0) {
            return Err(Error::invalid("waist_m", "must be > 0"));
        }
        if !(self.interaction_strength >= 0.0) {
            return Err(Error::invalid("interaction_strength", "must be >= 0"));
        }
        if self.interaction_strength >= 1.0 {
            return Err(Error::invalid(
                "interaction_strength",
                "must be < 1 (below threshold)",
            ));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(Error::invalid("wavelength_m", "must be > 0"));
        }
        Ok(())
    }
}

/// Full scatter budget record, linear and dB, with first-order
/// uncertainties where the inputs carry them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterBudget {
    /// Backscatter reflectivity, power ratio.
    pub r_opo: f64,
    /// `10 log10(r_opo)`, dB.
    pub r_opo_db: f64,
    /// Crystal BSDF, 1/sr.
    pub bsdf_per_sr: f64,
    /// Solid angle at the crystal waist, sr.
    pub solid_angle_sr: f64,
    /// Symmetric relative 1-sigma uncertainty on r_opo (and on the dB value
    /// via 10 log10(1 + rel)).
    pub r_opo_rel_uncertainty: f64,
    /// Symmetric relative 1-sigma uncertainty on the BSDF.
    pub bsdf_rel_uncertainty: f64,
}

/// One measured input with a symmetric absolute 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Measured { value, sigma: 0.0 }
    }

    fn rel(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.sigma / self.value
        }
    }
}

/// Measured powers and efficiencies feeding the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetMeasurements {
    /// Backscatter power at the readout photodetector P_s, W.
    pub backscatter_w: Measured,
    /// Squeezing-path measurement efficiency eta.
    pub squeezing_path_efficiency: Measured,
    /// Mode-matched fraction rho of the spurious power.
    pub mode_match_fraction: Measured,
    /// Spurious power incident on the OPO P_sp, W.
    pub spurious_w: Measured,
    /// Absolute 1-sigma uncertainty on the input coupler reflectivity.
    #[serde(default)]
    pub input_coupler_sigma: f64,
}

/// Backscatter reflectivity from measured powers:
/// `R_OPO = P_s / (eta_sqz rho P_sp)`.
///
/// Consumes the squeezing-path efficiency (the light leaving the OPO must
/// survive the injection path to be measured at the readout), not the
/// photodiode efficiency.
pub fn r_opo_from_powers(
    backscatter_w: f64,
    eta_sqz: f64,
    rho: f64,
    spurious_w: f64,
) -> Result<f64> {
    if !(backscatter_w > 0.0) {
        return Err(Error::invalid("backscatter_w", "must be > 0"));
    }
    if !(eta_sqz > 0.0 && eta_sqz <= 1.0) {
        return Err(Error::invalid("eta_sqz", "must lie in (0, 1]"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid("rho", "must lie in (0, 1]"));
    }
    if !(spurious_w > 0.0) {
        return Err(Error::invalid("spurious_w", "must be > 0"));
    }
    Ok(backscatter_w / (eta_sqz * rho * spurious_w))
}

/// Solid angle subtended by the cavity mode at the crystal,
/// `Omega = lambda^2 / (pi W0^2)`.
pub fn solid_angle(wavelength_m: f64, waist_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::invalid("wavelength_m", "must be > 0"));
    }
    if !(waist_m > 0.0) {
        return Err(Error::invalid("waist_m", "must be > 0"));
    }
    Ok(wavelength_m * wavelength_m / (std::f64::consts::PI * waist_m * waist_m))
}

/// Cavity multiplier relating BSDF to R_OPO: `R_OPO = BSDF * gain`.
///
/// Covers the solid angle, the input-coupler buildup and the parametric
/// amplification of circulating scatter.
pub fn cavity_scatter_gain(opo: &OpoParams) -> Result<f64> {
    opo.validate()?;
    let omega = solid_angle(opo.wavelength_m, opo.waist_m)?;
    let x = opo.interaction_strength;
    let r_in = opo.input_coupler_reflectivity;
    let parametric = (1.0 - 2.0 * x * opo.pump_relative_phase_rad.cos() + x * x)
        / ((1.0 - x * x) * (1.0 - x * x));
    Ok(16.0 * omega / ((1.0 - r_in) * (1.0 - r_in)) * parametric)
}

/// Crystal BSDF from a measured reflectivity: `BSDF = R_OPO / gain`.
///
/// With `theta_sc = 0` this is the conservative upper bound.
pub fn infer_bsdf(r_opo: f64, opo: &OpoParams) -> Result<f64> {
    if !(r_opo > 0.0 && r_opo < 1.0) {
        return Err(Error::invalid("r_opo", "must lie in (0, 1)"));
    }
    Ok(r_opo / cavity_scatter_gain(opo)?)
}

/// R_OPO reduction factor of a parameter change at fixed BSDF:
/// `gain(base) / gain(changed)`.
pub fn mitigation_whatif(base: &OpoParams, changed: &OpoParams, fixed_bsdf: f64) -> Result<f64> {
    if !(fixed_bsdf > 0.0) {
        return Err(Error::invalid("fixed_bsdf", "must be > 0"));
    }
    let r_base = fixed_bsdf * cavity_scatter_gain(base)?;
    let r_changed = fixed_bsdf * cavity_scatter_gain(changed)?;
    Ok(r_base / r_changed)
}

/// Reflectivity in dB of power ratio.
pub fn to_db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

/// Full budget with first-order symmetric uncertainty propagation.
pub fn scatter_budget(measurements: &BudgetMeasurements, opo: &OpoParams) -> Result<ScatterBudget> {
    let r_opo = r_opo_from_powers(
        measurements.backscatter_w.value,
        measurements.squeezing_path_efficiency.value,
        measurements.mode_match_fraction.value,
        measurements.spurious_w.value,
    )?;
    let r_opo_rel = (measurements.backscatter_w.rel().powi(2)
        + measurements.squeezing_path_efficiency.rel().powi(2)
        + measurements.mode_match_fraction.rel().powi(2)
        + measurements.spurious_w.rel().powi(2))
    .sqrt();
    let bsdf = infer_bsdf(r_opo, opo)?;
    // d(gain)/gain = 2 dR_in / (1 - R_in) at fixed everything else.
    let gain_rel = 2.0 * measurements.input_coupler_sigma / (1.0 - opo.input_coupler_reflectivity);
    let bsdf_rel = (r_opo_rel * r_opo_rel + gain_rel * gain_rel).sqrt();
    Ok(ScatterBudget {
        r_opo,
        r_opo_db: to_db(r_opo),
        bsdf_per_sr: bsdf,
        solid_angle_sr: solid_angle(opo.wavelength_m, opo.waist_m)?,
        r_opo_rel_uncertainty: r_opo_rel,
        bsdf_rel_uncertainty: bsdf_rel,
    })
}
