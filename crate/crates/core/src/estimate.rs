//! Backscatter parameter extraction from measured spectra.
//!
//! The shelf fit recovers the backscatter-to-carrier power ratio as the
//! single free parameter of the analytic shelf model, least squares in
//! log-ASD space over a plateau band. Driven small-motion measurements are
//! scaled to background levels per frequency, and a linearity check
//! verifies that runs at different drive strengths agree on the inferred
//! background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CarrierState;
use crate::spectral::{shelf_model_asd, MotionSpectrum, RinSpectrum};

/// Inferred backgrounds spreading by more than this factor across drive
/// levels indicate the linear-coupling assumption broke down.
pub const NONLINEARITY_DISPERSION_LIMIT: f64 = 2.0;

/// Harmonics below this multiple of the drive frequency are excluded from
/// shelf fits; individual line granularity dominates there.
pub const FIT_BAND_LOWER_HARMONIC: f64 = 5.0;

/// Width of one fit analysis block, in drive harmonics.
pub const FIT_BLOCK_HARMONICS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShelfFitResult {
    /// Fitted backscatter-to-carrier power ratio P_s / P_c.
    pub ratio: f64,
    /// First-order 1-sigma uncertainty on `ratio` from the residual scatter.
    pub ratio_uncertainty: f64,
    /// RMS of the post-fit analysis-block power residuals, dB.
    pub residual_rms_db: f64,
    /// Band actually used after the low-harmonic exclusion, Hz.
    pub fit_band_hz: (f64, f64),
    /// Number of spectrum bins entering the fit.
    pub bins_used: usize,
    /// Set when the fit does not support a detection: either the ratio is
    /// within 2 sigma of zero, or a flat spectrum explains the band at
    /// least as well as the shelf shape does.
    pub upper_limit: bool,
}

/// Least-squares fit of the shelf model to a measured RIN spectrum.
///
/// `fit_band_hz` must lie inside `(f_m, phi_m * f_m)`; its lower edge is
/// additionally clamped to [`FIT_BAND_LOWER_HARMONIC`] drive harmonics.
///
/// The comparison aggregates measured and model power into analysis blocks
/// a few drive harmonics wide before taking logs. The harmonic comb
/// amplitudes oscillate strongly from line to line and the estimator
/// window redistributes power between neighboring bins; block powers are
/// insensitive to both, so the log-space least squares stays unbiased at
/// any spectral resolution.
pub fn fit_shelf(
    measured: &RinSpectrum,
    phi_m_rad: f64,
    f_m_hz: f64,
    fit_band_hz: (f64, f64),
) -> Result<ShelfFitResult> {
    measured.validate()?;
    if !(f_m_hz > 0.0) {
        return Err(Error::invalid("f_m_hz", "must be > 0"));
    }
    let (band_lo, band_hi) = fit_band_hz;
    let shelf_edge = phi_m_rad * f_m_hz;
    if !(band_lo < band_hi) {
        return Err(Error::invalid(
            "fit_band_hz",
            "lower edge must be below upper",
        ));
    }
    if band_lo <= f_m_hz || band_hi > shelf_edge {
        return Err(Error::Regime(format!(
            "fit band [{band_lo}, {band_hi}] Hz must lie inside the shelf \
             ({f_m_hz}, {shelf_edge}) Hz"
        )));
    }
    let grid_lo = *measured.frequencies_hz.first().unwrap();
    let grid_hi = *measured.frequencies_hz.last().unwrap();
    if band_lo < grid_lo || band_hi > grid_hi {
        return Err(Error::invalid(
            "fit_band_hz",
            format!("spectrum covers [{grid_lo}, {grid_hi}] Hz, not the fit band"),
        ));
    }
    let lo = band_lo.max(FIT_BAND_LOWER_HARMONIC * f_m_hz);
    if lo >= band_hi {
        return Err(Error::Regime(format!(
            "after excluding harmonics below {FIT_BAND_LOWER_HARMONIC} f_m the \
             band [{lo}, {band_hi}] Hz is empty"
        )));
    }

    let template = shelf_model_asd(1.0, phi_m_rad, f_m_hz, &measured.frequencies_hz)?;
    let df = measured.resolution_hz;
    let bins_per_block = ((FIT_BLOCK_HARMONICS * f_m_hz / df).ceil() as usize).max(4);

    let mut bins_used = 0usize;
    let mut block_data = 0.0;
    let mut block_model = 0.0;
    let mut in_block = 0usize;
    let mut log_residuals = Vec::new();
    let mut log_data = Vec::new();
    for ((f, data), model) in measured
        .frequencies_hz
        .iter()
        .zip(&measured.asd)
        .zip(&template.asd)
    {
        if *f < lo || *f > band_hi {
            continue;
        }
        if !(*data > 0.0) {
            return Err(Error::invalid(
                "measured",
                format!("non-positive ASD bin at {f} Hz inside the fit band"),
            ));
        }
        block_data += data * data * df;
        block_model += model * model * df;
        in_block += 1;
        if in_block == bins_per_block {
            // Blocks without model power carry no shape information.
            if block_model > 0.0 && block_data > 0.0 {
                log_residuals.push(block_data.ln() - block_model.ln());
                log_data.push(block_data.ln());
                bins_used += bins_per_block;
            }
            block_data = 0.0;
            block_model = 0.0;
            in_block = 0;
        }
    }
    // A trailing partial block is dropped: unequal bin counts would skew
    // the flat-model comparison.
    let n = log_residuals.len();
    if n < 3 {
        return Err(Error::Regime(format!(
            "only {n} usable analysis blocks in the fit band; need at least 3"
        )));
    }

    // Block powers scale linearly in the ratio, so the least squares in log
    // space has the closed form below.
    let mean = log_residuals.iter().sum::<f64>() / n as f64;
    let ratio = mean.exp();
    let var = log_residuals
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let s = var.sqrt();
    let sigma_log_ratio = s / (n as f64).sqrt();
    let ratio_uncertainty = ratio * sigma_log_ratio;
    let residual_rms_db = 10.0 / std::f64::consts::LN_10
        * (log_residuals
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / n as f64)
            .sqrt();

    // Null-hypothesis comparison: if a flat spectrum fits the band at least
    // as well as the shelf shape, the "detection" is only an upper limit.
    let flat_mean = log_data.iter().sum::<f64>() / n as f64;
    let flat_var = log_data
        .iter()
        .map(|d| (d - flat_mean) * (d - flat_mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let upper_limit = ratio < 2.0 * ratio_uncertainty || flat_var <= var;

    Ok(ShelfFitResult {
        ratio,
        ratio_uncertainty,
        residual_rms_db,
        fit_band_hz: (lo, band_hi),
        bins_used,
        upper_limit,
    })
}

/// Absolute power with a symmetric 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub watts: f64,
    pub uncertainty_w: f64,
}

/// Absolute backscatter power from a fitted ratio: `P_s = ratio * P_c`,
/// uncertainty propagated linearly from the ratio. A zero ratio is allowed
/// so upper-limit bounds map to a zero-power bound.
pub fn infer_backscatter_power(
    fit: &ShelfFitResult,
    carrier: &CarrierState,
) -> Result<PowerEstimate> {
    carrier.validate()?;
    if !(fit.ratio >= 0.0) || !fit.ratio.is_finite() {
        return Err(Error::invalid("fit.ratio", "must be finite and >= 0"));
    }
    Ok(PowerEstimate {
        watts: fit.ratio * carrier.mean_power_w,
        uncertainty_w: fit.ratio_uncertainty * carrier.mean_power_w,
    })
}

/// Scale a driven backscatter RIN measurement to background motion levels:
/// `RIN_bg(f) = RIN_dr(f) * dz_bg(f) / dz_dr(f)`, evaluated at one
/// frequency with no band averaging.
pub fn scale_background(
    driven_rin: &RinSpectrum,
    driven_motion: &MotionSpectrum,
    background_motion: &MotionSpectrum,
    at_hz: f64,
) -> Result<f64> {
    let driven = driven_motion.asd_at(at_hz)?;
    let background = background_motion.asd_at(at_hz)?;
    if !(driven > background) {
        return Err(Error::InsufficientExcitation {
            at_hz,
            driven_asd: driven,
            background_asd: background,
        });
    }
    Ok(driven_rin.asd_at(at_hz)? * background / driven)
}

/// One driven measurement entering a linearity check.
#[derive(Debug, Clone)]
pub struct LinearityRun {
    /// Nominal drive amplitude, m.
    pub drive_level_m: f64,
    pub driven_rin: RinSpectrum,
    pub driven_motion: MotionSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub drive_levels_m: Vec<f64>,
    /// Background RIN inferred from each run, 1/rtHz.
    pub inferred_backgrounds: Vec<f64>,
    /// max/min of the inferred backgrounds.
    pub dispersion_factor: f64,
    /// Dispersion beyond [`NONLINEARITY_DISPERSION_LIMIT`].
    pub nonlinearity_flag: bool,
    /// Whether the drive levels span at least a factor of 3; checks run on
    /// narrower spans are reported but carry little weight.
    pub sufficient_span: bool,
}

/// Apply [`scale_background`] to every run and report how tightly the
/// inferred backgrounds cluster.
pub fn linearity_check(
    runs: &[LinearityRun],
    background_motion: &MotionSpectrum,
    at_hz: f64,
) -> Result<LinearityReport> {
    if runs.len() < 2 {
        return Err(Error::invalid("runs", "need at least 2 driven runs"));
    }
    let mut drive_levels = Vec::with_capacity(runs.len());
    let mut inferred = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        if !(run.drive_level_m > 0.0) || !run.drive_level_m.is_finite() {
            return Err(Error::invalid(
                format!("runs[{i}].drive_level_m"),
                "must be finite and > 0",
            ));
        }
        let bg = scale_background(
            &run.driven_rin,
            &run.driven_motion,
            background_motion,
            at_hz,
        )?;
        if !(bg > 0.0) {
            return Err(Error::invalid(
                format!("runs[{i}]"),
                format!("inferred background {bg} is not positive at {at_hz} Hz"),
            ));
        }
        drive_levels.push(run.drive_level_m);
        inferred.push(bg);
    }
    let max = inferred.iter().cloned().fold(f64::MIN, f64::max);
    let min = inferred.iter().cloned().fold(f64::MAX, f64::min);
    let dispersion_factor = max / min;
    let lvl_max = drive_levels.iter().cloned().fold(f64::MIN, f64::max);
    let lvl_min = drive_levels.iter().cloned().fold(f64::MAX, f64::min);
    Ok(LinearityReport {
        drive_levels_m: drive_levels,
        inferred_backgrounds: inferred,
        dispersion_factor,
        nonlinearity_flag: dispersion_factor > NONLINEARITY_DISPERSION_LIMIT,
        sufficient_span: lvl_max / lvl_min >= 3.0,
    })
}
