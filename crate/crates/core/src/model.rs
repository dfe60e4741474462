//! Analytical model of backscattered light in an interferometric readout.
//!
//! Everything here is a pure function of its inputs. The two-beam
//! interference of the carrier with a weak backscattered field gives the
//! detected power
//!
//! ```text
//! P = P_c + P_s + 2 sqrt(P_c P_s) cos(phi_s),    phi_s = 4 pi Z / lambda
//! ```
//!
//! and the relative intensity noise (RIN) it induces separates into a
//! large-displacement fringe-wrapping term and a small-displacement linear
//! term once `sin(2 k Z_s)` is replaced by its many-cycle RMS value
//! `1/sqrt(2)` and `cos(2 k dz)` by 1. The exact expression stays available
//! through [`detected_power`] so the approximate split can always be checked
//! against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2018 CODATA values used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Planck constant, J s.
    pub planck: f64,
    /// Speed of light, m/s.
    pub light_speed: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        planck: 6.626_070_15e-34,
        light_speed: 2.997_924_58e8,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// The interferometer readout beam that every noise term is normalized to.
///
/// The two efficiencies are deliberately distinct fields: the squeezing-path
/// measurement efficiency (~38%) enters the OPO reflectivity budget, while
/// the photodiode efficiency (~96%) enters quantum-noise expressions.
/// Operations document which one they consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierState {
    /// Mean carrier power at the readout photodetector, W.
    pub mean_power_w: f64,
    /// Carrier wavelength, m.
    pub wavelength_m: f64,
    /// Photodiode quantum efficiency, in (0, 1].
    pub photodiode_efficiency: f64,
    /// Measurement efficiency of the squeezing path, in (0, 1].
    pub squeezing_path_efficiency: f64,
}

impl CarrierState {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_power_w > 0.0) || !self.mean_power_w.is_finite() {
            return Err(Error::invalid("mean_power_w", "must be finite and > 0"));
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return Err(Error::invalid("wavelength_m", "must be finite and > 0"));
        }
        for (name, eta) in [
            ("photodiode_efficiency", self.photodiode_efficiency),
            ("squeezing_path_efficiency", self.squeezing_path_efficiency),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::invalid(name, "must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// One backscatter path: how much light comes back and how the path moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPath {
    /// Backscattered power reaching the readout photodetector, W.
    pub backscatter_power_w: f64,
    /// Spurious carrier power incident on the scattering optic, W.
    pub spurious_incident_power_w: f64,
    /// Fraction of the spurious power matching the cavity spatial and
    /// polarization mode, in [0, 1].
    pub mode_match_fraction: f64,
    /// Static (large, slowly varying) beam-path displacement, m.
    pub static_displacement_m: f64,
    /// Fluctuating (small) beam-path displacement, m.
    pub fluctuating_displacement_m: f64,
}

impl ScatterPath {
    pub fn validate(&self) -> Result<()> {
        if !(self.backscatter_power_w >= 0.0) {
            return Err(Error::invalid("backscatter_power_w", "must be >= 0"));
        }
        if !(self.spurious_incident_power_w >= 0.0) {
            return Err(Error::invalid("spurious_incident_power_w", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.mode_match_fraction) {
            return Err(Error::invalid("mode_match_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// The weak-backscatter model only holds for P_s well below the carrier;
/// operations that rely on the split RIN expressions enforce this ratio.
pub const BACKSCATTER_RATIO_LIMIT: f64 = 1e-3;

/// Both RIN contributions of a backscatter path, already normalized by the
/// carrier power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackscatterRin {
    /// Large-displacement (fringe-wrapping) term,
    /// `2 sqrt(P_s/P_c) cos(4 pi Z_s / lambda)`.
    pub large_displacement: f64,
    /// Small-displacement (linear) term,
    /// `sqrt(2 P_s/P_c) * 4 pi dz / lambda`.
    pub small_displacement: f64,
}

/// Total power on the readout photodetector for a given relative phase.
///
/// Exact two-beam interference, no small-backscatter approximation.
pub fn detected_power(
    carrier: &CarrierState,
    scatter: &ScatterPath,
    phase_rad: f64,
) -> Result<f64> {
    carrier.validate()?;
    scatter.validate()?;
    let p_c = carrier.mean_power_w;
    let p_s = scatter.backscatter_power_w;
    Ok(p_c + p_s + 2.0 * (p_c * p_s).sqrt() * phase_rad.cos())
}

/// Relative phase accrued over a round trip of the scatter path,
/// `4 pi Z / lambda`.
pub fn phase_from_displacement(displacement_m: f64, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::invalid("wavelength_m", "must be > 0"));
    }
    Ok(4.0 * std::f64::consts::PI * displacement_m / wavelength_m)
}

/// Split backscatter RIN terms (large- and small-displacement).
///
/// Uses the static and fluctuating displacements carried by `scatter`. The
/// `sin(2 k Z_s) ~ 1/sqrt(2)` many-cycle average is baked into the
/// small-displacement term, read here as an RMS statement over fringe
/// cycles rather than an instantaneous value.
pub fn rin_backscatter(carrier: &CarrierState, scatter: &ScatterPath) -> Result<BackscatterRin> {
    carrier.validate()?;
    scatter.validate()?;
    let ratio = scatter.backscatter_power_w / carrier.mean_power_w;
    if ratio >= BACKSCATTER_RATIO_LIMIT {
        return Err(Error::ModelValidity(format!(
            "backscatter-to-carrier ratio {ratio:.3e} exceeds {BACKSCATTER_RATIO_LIMIT:.0e}; \
             the split RIN expressions assume P_s << P_c"
        )));
    }
    let z_s = scatter.static_displacement_m;
    let dz = scatter.fluctuating_displacement_m;
    if z_s != 0.0 && dz != 0.0 && dz.abs() > z_s.abs() / 10.0 {
        return Err(Error::ModelValidity(format!(
            "fluctuating displacement {dz:.3e} m is not small against the \
             static displacement {z_s:.3e} m"
        )));
    }
    let phase = phase_from_displacement(z_s, carrier.wavelength_m)?;
    let large = 2.0 * ratio.sqrt() * phase.cos();
    let small = (2.0 * ratio).sqrt() * 4.0 * std::f64::consts::PI * dz / carrier.wavelength_m;
    Ok(BackscatterRin {
        large_displacement: large,
        small_displacement: small,
    })
}

/// Quantum-noise RIN floor of the readout, `sqrt(2 h c lambda / (eta_pd P_c))`.
///
/// Consumes the photodiode efficiency, not the squeezing-path efficiency.
pub fn quantum_noise_rin(carrier: &CarrierState) -> Result<f64> {
    carrier.validate()?;
    let c = PhysicalConstants::CODATA;
    Ok((2.0 * c.planck * c.light_speed * carrier.wavelength_m
        / (carrier.photodiode_efficiency * carrier.mean_power_w))
        .sqrt())
}

/// Background backscatter RIN relative to the quantum-noise RIN,
/// `4 pi dz sqrt(eta_pd P_s / (lambda h c))`.
///
/// `dz_asd` is the displacement amplitude spectral density of the scatter
/// path in m/rtHz. The carrier mean power cancels out of this ratio; only
/// the wavelength and photodiode efficiency of `carrier` enter.
pub fn backscatter_qn_ratio(
    dz_asd: f64,
    scatter: &ScatterPath,
    carrier: &CarrierState,
) -> Result<f64> {
    carrier.validate()?;
    scatter.validate()?;
    if !(dz_asd >= 0.0) {
        return Err(Error::invalid("dz_asd", "must be >= 0"));
    }
    let c = PhysicalConstants::CODATA;
    let under = carrier.photodiode_efficiency * scatter.backscatter_power_w
        / (carrier.wavelength_m * c.planck * c.light_speed);
    Ok(4.0 * std::f64::consts::PI * dz_asd * under.sqrt())
}
