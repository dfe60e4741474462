//! Deterministic, seeded synthesis of contaminated photodetector signals.
//!
//! Two displacement regimes are covered, matching the two measurement modes
//! the model supports: a large sinusoidal phase drive that wraps fringes and
//! upconverts into the shelf, and small tonal or stochastic motion that
//! couples linearly. Both produce the exact two-beam power of
//! [`crate::model::detected_power`] sample by sample, optionally with white
//! Gaussian shot noise at the quantum RIN level.
//!
//! Identical `(config, seed)` always reproduces the same samples bit for
//! bit; all randomness flows from one ChaCha stream per call.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quantum_noise_rin, CarrierState, ScatterPath, BACKSCATTER_RATIO_LIMIT};

const TAU: f64 = std::f64::consts::TAU;

/// Sampled signal. Power series carry watts; displacement traces carry
/// meters. Units ride in the file sidecar, not the type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
}

impl TimeSeries {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::invalid("sample_rate_hz", "must be finite and > 0"));
        }
        if self.samples.len() < 2 {
            return Err(Error::invalid("samples", "need at least 2 samples"));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Default slow drift of the static path phase, rad/s.
///
/// The static path length wanders on the scale of microns over a
/// measurement, so the offset phase sweeps many cycles across a long
/// record. Averaged spectra then approach the phase-averaged shelf, which
/// is what the analytic model describes. One rad/s drifts ~100 cycles over
/// a 600 s record while smearing each harmonic by well under a 1 Hz bin.
pub const DEFAULT_PHASE_DRIFT_RAD_PER_S: f64 = 1.0;

/// Small-motion drives must stay far below a wavelength: amplitude (or RMS
/// for stochastic drives) under lambda times this fraction.
pub const SMALL_MOTION_LIMIT_FRACTION: f64 = 0.01;

/// What moves the scatter path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveKind {
    /// Large sinusoidal phase modulation of the scatter path (shelf drive).
    SinusoidalPhase {
        frequency_hz: f64,
        modulation_depth_rad: f64,
        /// Fixed offset phase; when absent a seeded uniform draw is used.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        static_phase_rad: Option<f64>,
        /// Slow drift of the offset phase; when absent,
        /// [`DEFAULT_PHASE_DRIFT_RAD_PER_S`] applies to a drawn phase and
        /// zero to an explicitly fixed one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase_drift_rad_per_s: Option<f64>,
    },
    /// Single-frequency displacement of amplitude `amplitude_m` (small
    /// motion).
    TonalDisplacement { frequency_hz: f64, amplitude_m: f64 },
    /// Seeded Gaussian displacement with the given one-sided ASD shape,
    /// `(frequency Hz, m/rtHz)` pairs, linearly interpolated and zero
    /// outside the listed range.
    StochasticBackground { asd_shape: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    #[serde(flatten)]
    pub kind: DriveKind,
    pub seed: u64,
}

/// Shot-noise switch for synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotNoise {
    Off,
    /// White Gaussian RIN at the [`quantum_noise_rin`] level.
    QuantumLimited,
}

fn sample_count(sample_rate_hz: f64, duration_s: f64) -> Result<usize> {
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(Error::invalid("sample_rate_hz", "must be finite and > 0"));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::invalid("duration_s", "must be finite and > 0"));
    }
    let n = (sample_rate_hz * duration_s).round() as usize;
    if n < 2 {
        return Err(Error::invalid(
            "duration_s",
            "must cover at least 2 samples",
        ));
    }
    Ok(n)
}

fn check_ratio(carrier: &CarrierState, scatter: &ScatterPath) -> Result<()> {
    let ratio = scatter.backscatter_power_w / carrier.mean_power_w;
    if ratio >= BACKSCATTER_RATIO_LIMIT {
        return Err(Error::ModelValidity(format!(
            "backscatter-to-carrier ratio {ratio:.3e} exceeds {BACKSCATTER_RATIO_LIMIT:.0e}"
        )));
    }
    Ok(())
}

/// Per-sample standard deviation of white noise whose one-sided ASD is
/// `asd` at sample rate `fs`.
fn white_sigma(asd: f64, fs: f64) -> f64 {
    asd * (fs / 2.0).sqrt()
}

/// Photodetector power under a large sinusoidal phase drive (shelf regime).
///
/// `P(t) = P_c + P_s + 2 sqrt(P_c P_s) cos(phi_m sin(2 pi f_m t) + phi_0(t))`
/// with `phi_0(t)` the (optionally drifting) static offset phase, plus
/// optional quantum-level shot noise.
pub fn synthesize_shelf_drive(
    carrier: &CarrierState,
    scatter: &ScatterPath,
    drive: &DriveConfig,
    sample_rate_hz: f64,
    duration_s: f64,
    shot: ShotNoise,
) -> Result<TimeSeries> {
    carrier.validate()?;
    scatter.validate()?;
    check_ratio(carrier, scatter)?;
    let (f_m, phi_m, static_phase, drift) = match drive.kind {
        DriveKind::SinusoidalPhase {
            frequency_hz,
            modulation_depth_rad,
            static_phase_rad,
            phase_drift_rad_per_s,
        } => (
            frequency_hz,
            modulation_depth_rad,
            static_phase_rad,
            phase_drift_rad_per_s,
        ),
        _ => {
            return Err(Error::Regime(
                "synthesize_shelf_drive requires a sinusoidal_phase drive".into(),
            ))
        }
    };
    if !(f_m > 0.0) {
        return Err(Error::invalid("frequency_hz", "must be > 0"));
    }
    if !(phi_m >= 0.0) {
        return Err(Error::invalid("modulation_depth_rad", "must be >= 0"));
    }
    // The instantaneous fringe frequency peaks at phi_m * f_m; demand margin.
    let required = 4.0 * phi_m * f_m;
    if sample_rate_hz <= required {
        return Err(Error::Undersampled {
            required_hz: required,
            actual_hz: sample_rate_hz,
        });
    }
    let n = sample_count(sample_rate_hz, duration_s)?;

    let mut rng = ChaCha12Rng::seed_from_u64(drive.seed);
    let phi_0 = match static_phase {
        Some(p) => p,
        None => rng.random_range(0.0..TAU),
    };
    let drift = drift.unwrap_or(if static_phase.is_some() {
        0.0
    } else {
        DEFAULT_PHASE_DRIFT_RAD_PER_S
    });

    let p_c = carrier.mean_power_w;
    let p_s = scatter.backscatter_power_w;
    let cross = 2.0 * (p_c * p_s).sqrt();
    let sigma = match shot {
        ShotNoise::Off => 0.0,
        ShotNoise::QuantumLimited => p_c * white_sigma(quantum_noise_rin(carrier)?, sample_rate_hz),
    };

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sample_rate_hz;
        let phase = phi_m * (TAU * f_m * t).sin() + phi_0 + drift * t;
        let mut p = p_c + p_s + cross * phase.cos();
        if sigma > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            p += sigma * g;
        }
        samples.push(p);
    }
    Ok(TimeSeries {
        samples,
        sample_rate_hz,
        start_time_s: 0.0,
    })
}

/// Photodetector power under small (sub-wavelength) path motion.
///
/// `phi_s(t) = 4 pi (Z_s + dz(t)) / lambda` with `dz(t)` the tonal or
/// seeded stochastic displacement of the drive. The amplitude guard keeps
/// the response in the linear regime; larger drives belong to
/// [`synthesize_shelf_drive`].
pub fn synthesize_small_motion(
    carrier: &CarrierState,
    scatter: &ScatterPath,
    drive: &DriveConfig,
    sample_rate_hz: f64,
    duration_s: f64,
    shot: ShotNoise,
) -> Result<TimeSeries> {
    carrier.validate()?;
    scatter.validate()?;
    check_ratio(carrier, scatter)?;
    let lambda = carrier.wavelength_m;
    let limit = lambda * SMALL_MOTION_LIMIT_FRACTION;
    match &drive.kind {
        DriveKind::TonalDisplacement {
            frequency_hz,
            amplitude_m,
        } => {
            if !(*frequency_hz > 0.0) {
                return Err(Error::invalid("frequency_hz", "must be > 0"));
            }
            if !(*amplitude_m >= 0.0) {
                return Err(Error::invalid("amplitude_m", "must be >= 0"));
            }
            if *amplitude_m >= limit {
                return Err(Error::Regime(format!(
                    "drive amplitude {amplitude_m:.3e} m is not small against the \
                     wavelength (limit {limit:.3e} m); use synthesize_shelf_drive \
                     for fringe-wrapping motion"
                )));
            }
            if sample_rate_hz <= 2.0 * frequency_hz {
                return Err(Error::Undersampled {
                    required_hz: 2.0 * frequency_hz,
                    actual_hz: sample_rate_hz,
                });
            }
        }
        DriveKind::StochasticBackground { .. } => {}
        DriveKind::SinusoidalPhase { .. } => {
            return Err(Error::Regime(
                "synthesize_small_motion takes displacement drives; \
                 sinusoidal_phase belongs to synthesize_shelf_drive"
                    .into(),
            ))
        }
    }

    let displacement = synthesize_displacement(drive, sample_rate_hz, duration_s)?;
    if let DriveKind::StochasticBackground { .. } = drive.kind {
        let rms = (displacement.samples.iter().map(|z| z * z).sum::<f64>()
            / displacement.samples.len() as f64)
            .sqrt();
        if rms >= limit {
            return Err(Error::Regime(format!(
                "stochastic drive RMS {rms:.3e} m is not small against the \
                 wavelength (limit {limit:.3e} m)"
            )));
        }
    }

    // Separate noise stream so the displacement draw stays the same whether
    // shot noise is on or off.
    let mut rng = ChaCha12Rng::seed_from_u64(drive.seed ^ 0x5107_4e01_5e5e_edca);
    let p_c = carrier.mean_power_w;
    let p_s = scatter.backscatter_power_w;
    let cross = 2.0 * (p_c * p_s).sqrt();
    let sigma = match shot {
        ShotNoise::Off => 0.0,
        ShotNoise::QuantumLimited => p_c * white_sigma(quantum_noise_rin(carrier)?, sample_rate_hz),
    };
    let two_k = 4.0 * std::f64::consts::PI / lambda;
    let z_s = scatter.static_displacement_m;

    let samples = displacement
        .samples
        .iter()
        .map(|dz| {
            let mut p = p_c + p_s + cross * (two_k * (z_s + dz)).cos();
            if sigma > 0.0 {
                let g: f64 = rng.sample(StandardNormal);
                p += sigma * g;
            }
            p
        })
        .collect();
    Ok(TimeSeries {
        samples,
        sample_rate_hz,
        start_time_s: 0.0,
    })
}

/// Displacement trace of a drive, in meters.
///
/// Tonal drives give `a sin(2 pi f t)`; stochastic drives are drawn by
/// seeded Gaussian spectral synthesis from the configured one-sided ASD
/// shape. Phase drives have no displacement trace of their own (the
/// modulation is specified in radians), so they are rejected.
pub fn synthesize_displacement(
    drive: &DriveConfig,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<TimeSeries> {
    let n = sample_count(sample_rate_hz, duration_s)?;
    let samples = match &drive.kind {
        DriveKind::TonalDisplacement {
            frequency_hz,
            amplitude_m,
        } => {
            if !(*frequency_hz > 0.0) {
                return Err(Error::invalid("frequency_hz", "must be > 0"));
            }
            (0..n)
                .map(|i| amplitude_m * (TAU * frequency_hz * i as f64 / sample_rate_hz).sin())
                .collect()
        }
        DriveKind::StochasticBackground { asd_shape } => {
            gaussian_from_asd(asd_shape, n, sample_rate_hz, drive.seed)?
        }
        DriveKind::SinusoidalPhase { .. } => {
            return Err(Error::Regime(
                "sinusoidal_phase drives are specified in radians and have \
                 no displacement trace"
                    .into(),
            ))
        }
    };
    Ok(TimeSeries {
        samples,
        sample_rate_hz,
        start_time_s: 0.0,
    })
}

fn interp_asd(shape: &[(f64, f64)], f: f64) -> f64 {
    if shape.is_empty() || f < shape[0].0 || f > shape[shape.len() - 1].0 {
        return 0.0;
    }
    match shape.binary_search_by(|(sf, _)| sf.partial_cmp(&f).unwrap()) {
        Ok(i) => shape[i].1,
        Err(i) => {
            let (f0, a0) = shape[i - 1];
            let (f1, a1) = shape[i];
            a0 + (a1 - a0) * (f - f0) / (f1 - f0)
        }
    }
}

/// Real Gaussian series whose one-sided PSD follows `asd^2` on the shape's
/// support. Standard frequency-domain synthesis: independent complex normal
/// coefficients scaled to the target PSD, Hermitian symmetrized, inverse
/// FFT.
fn gaussian_from_asd(
    shape: &[(f64, f64)],
    n: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    for w in shape.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(Error::invalid(
                "asd_shape",
                "frequencies must be strictly increasing",
            ));
        }
    }
    if shape.iter().any(|&(f, a)| !(f >= 0.0) || !(a >= 0.0)) {
        return Err(Error::invalid(
            "asd_shape",
            "frequencies and ASD values must be >= 0",
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let df = sample_rate_hz / n as f64;
    for k in 1..=n / 2 {
        let f = k as f64 * df;
        let asd = interp_asd(shape, f);
        let psd = asd * asd;
        if k == n - k {
            // Nyquist bin (even n) is real.
            let g: f64 = rng.sample(StandardNormal);
            spec[k] = Complex::new((psd * sample_rate_hz * n as f64 / 2.0).sqrt() * g, 0.0);
        } else {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let amp = (psd * sample_rate_hz * n as f64 / 4.0).sqrt();
            spec[k] = Complex::new(amp * g1, amp * g2);
            spec[n - k] = spec[k].conj();
        }
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spec);
    Ok(spec.iter().map(|c| c.re / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carrier() -> CarrierState {
        CarrierState {
            mean_power_w: 16.1e-3,
            wavelength_m: 1.064e-6,
            photodiode_efficiency: 0.96,
            squeezing_path_efficiency: 0.38,
        }
    }

    fn scatter() -> ScatterPath {
        ScatterPath {
            backscatter_power_w: 1.7e-11 * 16.1e-3,
            spurious_incident_power_w: 0.7e-6,
            mode_match_fraction: 0.11,
            static_displacement_m: 1.064e-6 / 16.0,
            fluctuating_displacement_m: 0.0,
        }
    }

    fn shelf_drive(phi_m: f64, f_m: f64, seed: u64) -> DriveConfig {
        DriveConfig {
            kind: DriveKind::SinusoidalPhase {
                frequency_hz: f_m,
                modulation_depth_rad: phi_m,
                static_phase_rad: None,
                phase_drift_rad_per_s: None,
            },
            seed,
        }
    }

    #[test]
    fn shelf_drive_is_deterministic() {
        let d = shelf_drive(173.0, 1.0, 42);
        let a = synthesize_shelf_drive(
            &carrier(),
            &scatter(),
            &d,
            2000.0,
            2.0,
            ShotNoise::QuantumLimited,
        )
        .unwrap();
        let b = synthesize_shelf_drive(
            &carrier(),
            &scatter(),
            &d,
            2000.0,
            2.0,
            ShotNoise::QuantumLimited,
        )
        .unwrap();
        assert_eq!(a, b);
        let c = synthesize_shelf_drive(
            &carrier(),
            &scatter(),
            &shelf_drive(173.0, 1.0, 43),
            2000.0,
            2.0,
            ShotNoise::QuantumLimited,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shelf_drive_rejects_undersampling() {
        let d = shelf_drive(173.0, 1.0, 1);
        let err = synthesize_shelf_drive(&carrier(), &scatter(), &d, 600.0, 1.0, ShotNoise::Off);
        assert!(matches!(err, Err(Error::Undersampled { .. })));
    }

    #[test]
    fn zero_depth_gives_constant_power() {
        let d = DriveConfig {
            kind: DriveKind::SinusoidalPhase {
                frequency_hz: 1.0,
                modulation_depth_rad: 0.0,
                static_phase_rad: Some(0.0),
                phase_drift_rad_per_s: None,
            },
            seed: 7,
        };
        let ts =
            synthesize_shelf_drive(&carrier(), &scatter(), &d, 500.0, 1.0, ShotNoise::Off).unwrap();
        let p0 = ts.samples[0];
        assert!(ts.samples.iter().all(|&p| p == p0));
        let expected = carrier().mean_power_w
            + scatter().backscatter_power_w
            + 2.0 * (carrier().mean_power_w * scatter().backscatter_power_w).sqrt();
        assert!((p0 - expected).abs() / expected < 1e-15);
    }

    #[test]
    fn shelf_rin_variance_matches_wrapped_cosine() {
        // var of (P - mean)/mean with shot off approaches 2 (P_s/P_c):
        // the cosine of a uniformly wrapped phase has variance 1/2 and the
        // RIN amplitude is 2 sqrt(P_s/P_c).
        let d = shelf_drive(173.0, 1.0, 3);
        let ts = synthesize_shelf_drive(&carrier(), &scatter(), &d, 2000.0, 60.0, ShotNoise::Off)
            .unwrap();
        let mean = ts.mean();
        let var = ts
            .samples
            .iter()
            .map(|p| ((p - mean) / mean).powi(2))
            .sum::<f64>()
            / ts.samples.len() as f64;
        let expected = 2.0 * 1.7e-11;
        assert!(
            (var - expected).abs() / expected < 0.05,
            "var {var:.3e} vs {expected:.3e}"
        );
    }

    #[test]
    fn shelf_mean_is_carrier_plus_backscatter() {
        let d = shelf_drive(173.0, 1.0, 11);
        let ts = synthesize_shelf_drive(
            &carrier(),
            &scatter(),
            &d,
            2000.0,
            120.0,
            ShotNoise::QuantumLimited,
        )
        .unwrap();
        let expected = carrier().mean_power_w + scatter().backscatter_power_w;
        // The residual static cross term is bounded by 2 sqrt(P_c P_s); with
        // the phase wrapping and drifting it averages well below that bound.
        let bound = 2.0 * (carrier().mean_power_w * scatter().backscatter_power_w).sqrt();
        assert!((ts.mean() - expected).abs() < bound);
    }

    #[test]
    fn small_motion_rejects_large_amplitude() {
        let d = DriveConfig {
            kind: DriveKind::TonalDisplacement {
                frequency_hz: 270.0,
                amplitude_m: 1.064e-6 / 4.0,
            },
            seed: 1,
        };
        let err = synthesize_small_motion(&carrier(), &scatter(), &d, 2000.0, 1.0, ShotNoise::Off);
        match err {
            Err(Error::Regime(msg)) => assert!(msg.contains("synthesize_shelf_drive")),
            other => panic!("expected regime error, got {other:?}"),
        }
    }

    #[test]
    fn small_motion_zero_amplitude_is_static() {
        let d = DriveConfig {
            kind: DriveKind::TonalDisplacement {
                frequency_hz: 270.0,
                amplitude_m: 0.0,
            },
            seed: 1,
        };
        let ts = synthesize_small_motion(&carrier(), &scatter(), &d, 2000.0, 1.0, ShotNoise::Off)
            .unwrap();
        let p0 = ts.samples[0];
        assert!(ts.samples.iter().all(|&p| p == p0));
    }

    #[test]
    fn tonal_line_height_scales_linearly() {
        // Doubling the drive amplitude doubles the tone in the power signal.
        let amp = 1.064e-9;
        let run = |a: f64| {
            let d = DriveConfig {
                kind: DriveKind::TonalDisplacement {
                    frequency_hz: 250.0,
                    amplitude_m: a,
                },
                seed: 5,
            };
            let ts =
                synthesize_small_motion(&carrier(), &scatter(), &d, 2000.0, 4.0, ShotNoise::Off)
                    .unwrap();
            // Project onto the drive quadrature.
            let n = ts.samples.len();
            let mean = ts.mean();
            let mut quad = 0.0;
            for (i, p) in ts.samples.iter().enumerate() {
                let t = i as f64 / 2000.0;
                quad += (p - mean) * (TAU * 250.0 * t).sin();
            }
            2.0 * quad / n as f64
        };
        let a1 = run(amp);
        let a2 = run(2.0 * amp);
        assert!(
            (a2 / a1 - 2.0).abs() < 0.02,
            "line ratio {} not within 2% of 2",
            a2 / a1
        );
    }

    #[test]
    fn stochastic_displacement_hits_target_rms() {
        let shape = vec![(1.0, 1e-12), (400.0, 1e-12)];
        let d = DriveConfig {
            kind: DriveKind::StochasticBackground { asd_shape: shape },
            seed: 9,
        };
        let ts = synthesize_displacement(&d, 1000.0, 64.0).unwrap();
        let var = ts.samples.iter().map(|z| z * z).sum::<f64>() / ts.samples.len() as f64;
        // Band-integrated PSD: (1e-12)^2 * (400 - 1) Hz.
        let expected = 1e-24 * 399.0;
        assert!(
            (var - expected).abs() / expected < 0.1,
            "var {var:.3e} vs {expected:.3e}"
        );
    }

    #[test]
    fn displacement_rejects_phase_drive() {
        let d = shelf_drive(10.0, 1.0, 2);
        assert!(matches!(
            synthesize_displacement(&d, 100.0, 1.0),
            Err(Error::Regime(_))
        ));
    }
}
