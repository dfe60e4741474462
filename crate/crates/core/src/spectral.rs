//! Spectral estimation and the analytic shelf model.
//!
//! Estimation is Hann-windowed averaged periodograms (Welch) with
//! Parseval-consistent one-sided normalization, so narrow lines and
//! broadband floors are both quantitatively usable once the ENBW is taken
//! into account. The shelf model renders the phase-averaged harmonic comb
//! of a large sinusoidal phase drive onto a frequency grid; its
//! band-integrated power equals `2 * (P_s / P_c)` by the Bessel sum rule.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_sequence;
use crate::error::{Error, Result};
use crate::synth::TimeSeries;

/// One-sided RIN amplitude spectral density, 1/rtHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RinSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub asd: Vec<f64>,
    /// Frequency step of the grid, Hz.
    pub resolution_hz: f64,
    /// Number of averaged periodogram segments (0 for analytic spectra).
    pub averages: usize,
}

/// One-sided displacement amplitude spectral density, m/rtHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub displacement_asd: Vec<f64>,
}

fn check_grid(frequencies: &[f64], values: &[f64], what: &str) -> Result<()> {
    if frequencies.len() != values.len() {
        return Err(Error::invalid(
            what,
            "frequency and value arrays differ in length",
        ));
    }
    if frequencies.len() < 2 {
        return Err(Error::invalid(what, "need at least 2 bins"));
    }
    if frequencies.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(
            what,
            "frequencies must be strictly increasing",
        ));
    }
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid(what, "spectral values must be >= 0"));
    }
    Ok(())
}

fn interp(frequencies: &[f64], values: &[f64], f_hz: f64, what: &str) -> Result<f64> {
    let first = *frequencies.first().unwrap();
    let last = *frequencies.last().unwrap();
    if f_hz < first || f_hz > last {
        return Err(Error::invalid(
            what,
            format!("frequency {f_hz} Hz outside covered range [{first}, {last}] Hz"),
        ));
    }
    match frequencies.binary_search_by(|g| g.partial_cmp(&f_hz).unwrap()) {
        Ok(i) => Ok(values[i]),
        Err(i) => {
            let (f0, f1) = (frequencies[i - 1], frequencies[i]);
            let (v0, v1) = (values[i - 1], values[i]);
            Ok(v0 + (v1 - v0) * (f_hz - f0) / (f1 - f0))
        }
    }
}

impl RinSpectrum {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.frequencies_hz, &self.asd, "rin_spectrum")
    }

    /// ASD at an arbitrary frequency, linear interpolation between bins.
    pub fn asd_at(&self, f_hz: f64) -> Result<f64> {
        self.validate()?;
        interp(&self.frequencies_hz, &self.asd, f_hz, "rin_spectrum")
    }
}

impl MotionSpectrum {
    pub fn validate(&self) -> Result<()> {
        check_grid(
            &self.frequencies_hz,
            &self.displacement_asd,
            "motion_spectrum",
        )
    }

    pub fn asd_at(&self, f_hz: f64) -> Result<f64> {
        self.validate()?;
        interp(
            &self.frequencies_hz,
            &self.displacement_asd,
            f_hz,
            "motion_spectrum",
        )
    }
}

fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Equivalent noise bandwidth of the Hann-windowed estimator, Hz.
///
/// A sinusoidal line of RMS amplitude `a` shows up as an ASD peak of
/// `a / sqrt(ENBW)`.
pub fn hann_enbw_hz(segment_length: usize, sample_rate_hz: f64) -> f64 {
    let w = hann_window(segment_length);
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    sample_rate_hz * sum_sq / (sum * sum)
}

/// Welch one-sided PSD of raw samples. Returns (frequencies, psd, segments).
fn welch_psd(
    samples: &[f64],
    sample_rate_hz: f64,
    segment_length: usize,
    overlap: f64,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if segment_length < 4 {
        return Err(Error::invalid("segment_length", "must be at least 4"));
    }
    if segment_length > samples.len() {
        return Err(Error::invalid(
            "segment_length",
            format!(
                "segment of {segment_length} samples exceeds series length {}",
                samples.len()
            ),
        ));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::invalid("overlap", "must lie in [0, 0.9]"));
    }
    let n = segment_length;
    let window = hann_window(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let step = ((n as f64) * (1.0 - overlap)).round().max(1.0) as usize;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + n <= samples.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        segments += 1;
        start += step;
    }
    // segment_length <= len guarantees at least one segment.
    debug_assert!(segments >= 1);

    let scale = 1.0 / (sample_rate_hz * window_power * segments as f64);
    let mut psd = vec![0.0; half + 1];
    for k in 0..=half {
        let one_sided = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else {
            2.0
        };
        psd[k] = acc[k] * scale * one_sided;
    }
    let freqs = (0..=half)
        .map(|k| k as f64 * sample_rate_hz / n as f64)
        .collect();
    Ok((freqs, psd, segments))
}

/// One-sided RIN ASD of a power series: Welch estimate of
/// `(P(t) - mean) / mean`.
pub fn estimate_rin_spectrum(
    series: &TimeSeries,
    segment_length: usize,
    overlap: f64,
) -> Result<RinSpectrum> {
    series.validate()?;
    let mean = series.mean();
    if !(mean != 0.0) || !mean.is_finite() {
        return Err(Error::invalid(
            "series",
            "mean power must be nonzero to form RIN",
        ));
    }
    let rin: Vec<f64> = series.samples.iter().map(|p| (p - mean) / mean).collect();
    let (freqs, psd, segments) = welch_psd(&rin, series.sample_rate_hz, segment_length, overlap)?;
    Ok(RinSpectrum {
        resolution_hz: series.sample_rate_hz / segment_length as f64,
        frequencies_hz: freqs,
        asd: psd.into_iter().map(f64::sqrt).collect(),
        averages: segments,
    })
}

/// One-sided displacement ASD of a displacement trace, m/rtHz.
pub fn estimate_motion_spectrum(
    series: &TimeSeries,
    segment_length: usize,
    overlap: f64,
) -> Result<MotionSpectrum> {
    series.validate()?;
    let (freqs, psd, _) = welch_psd(
        &series.samples,
        series.sample_rate_hz,
        segment_length,
        overlap,
    )?;
    Ok(MotionSpectrum {
        frequencies_hz: freqs,
        displacement_asd: psd.into_iter().map(f64::sqrt).collect(),
    })
}

/// Margin past the turning point for the Bessel harmonic truncation: the
/// orders up to `phi_m + 10 phi_m^(1/3)` cover the turning-point lobe where
/// J_n(phi_m) peaks before the superexponential decay.
fn shelf_order_limit(phi_m: f64) -> usize {
    (phi_m + 10.0 * phi_m.cbrt()).ceil() as usize
}

/// Phase-averaged analytic shelf ASD on a uniform frequency grid.
///
/// The fringe-wrapped RIN `2 sqrt(ratio) cos(phi_m sin(2 pi f_m t) + phi_0)`
/// concentrates its power in harmonics of `f_m` with phase-averaged powers
/// `2 ratio J_0^2(phi_m)` at DC and `4 ratio J_n^2(phi_m)` at `n f_m`.
/// Each harmonic's power is deposited into the grid bin that contains it
/// and converted to an ASD, which makes the rendering Parseval-consistent
/// for any grid resolution: coarse grids show the smooth shelf, fine grids
/// the underlying comb.
pub fn shelf_model_asd(
    ratio: f64,
    phi_m_rad: f64,
    f_m_hz: f64,
    frequencies_hz: &[f64],
) -> Result<RinSpectrum> {
    if !(ratio >= 0.0) || !ratio.is_finite() {
        return Err(Error::invalid("ratio", "must be finite and >= 0"));
    }
    if !(f_m_hz > 0.0) {
        return Err(Error::invalid("f_m_hz", "must be > 0"));
    }
    if !(phi_m_rad > std::f64::consts::TAU) {
        return Err(Error::Regime(format!(
            "modulation depth {phi_m_rad} rad is below 2 pi: no shelf forms; \
             model the drive as discrete lines instead"
        )));
    }
    if frequencies_hz.len() < 2 {
        return Err(Error::invalid("frequencies_hz", "need at least 2 bins"));
    }
    let df = frequencies_hz[1] - frequencies_hz[0];
    if !(df > 0.0) {
        return Err(Error::invalid(
            "frequencies_hz",
            "must be strictly increasing",
        ));
    }
    for w in frequencies_hz.windows(2) {
        if ((w[1] - w[0]) - df).abs() > 1e-6 * df {
            return Err(Error::GridMismatch(
                "shelf model needs a uniform frequency grid".into(),
            ));
        }
    }

    let n_max = shelf_order_limit(phi_m_rad);
    let j = bessel_j_sequence(n_max, phi_m_rad);
    let f0 = frequencies_hz[0];
    let mut power = vec![0.0; frequencies_hz.len()];
    for (n, jn) in j.iter().enumerate() {
        let line = if n == 0 {
            2.0 * ratio * jn * jn
        } else {
            4.0 * ratio * jn * jn
        };
        let f_n = n as f64 * f_m_hz;
        let idx = ((f_n - f0) / df).round();
        if idx < 0.0 || idx >= frequencies_hz.len() as f64 {
            continue;
        }
        let idx = idx as usize;
        if (f_n - frequencies_hz[idx]).abs() <= df / 2.0 + 1e-9 * df {
            power[idx] += line;
        }
    }
    Ok(RinSpectrum {
        frequencies_hz: frequencies_hz.to_vec(),
        asd: power.into_iter().map(|p| (p / df).sqrt()).collect(),
        resolution_hz: df,
        averages: 0,
    })
}

/// Convert an accelerometer ASD to a displacement ASD:
/// `x(f) = a(f) / (2 pi f)^2`.
pub fn accel_to_displacement(accel_asd: &[(f64, f64)]) -> Result<MotionSpectrum> {
    if accel_asd.len() < 2 {
        return Err(Error::invalid("accel_asd", "need at least 2 bins"));
    }
    for w in accel_asd.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(Error::invalid(
                "accel_asd",
                "frequencies must be strictly increasing",
            ));
        }
    }
    let mut frequencies = Vec::with_capacity(accel_asd.len());
    let mut asd = Vec::with_capacity(accel_asd.len());
    for &(f, a) in accel_asd {
        if !(f > 0.0) {
            return Err(Error::invalid(
                "accel_asd",
                format!("frequency {f} Hz must be > 0 for the 1/f^2 conversion"),
            ));
        }
        if !(a >= 0.0) {
            return Err(Error::invalid("accel_asd", "ASD values must be >= 0"));
        }
        let omega_sq = (std::f64::consts::TAU * f).powi(2);
        frequencies.push(f);
        asd.push(a / omega_sq);
    }
    Ok(MotionSpectrum {
        frequencies_hz: frequencies,
        displacement_asd: asd,
    })
}

/// Inverse of [`accel_to_displacement`], mostly for round-trip checks.
pub fn displacement_to_accel(motion: &MotionSpectrum) -> Result<Vec<(f64, f64)>> {
    motion.validate()?;
    motion
        .frequencies_hz
        .iter()
        .zip(&motion.displacement_asd)
        .map(|(&f, &x)| {
            if !(f > 0.0) {
                return Err(Error::invalid("motion_spectrum", "frequency must be > 0"));
            }
            Ok((f, x * (std::f64::consts::TAU * f).powi(2)))
        })
        .collect()
}
