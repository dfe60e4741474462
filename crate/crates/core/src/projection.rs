//! Advanced LIGO backscatter requirement construction and margin reports.
//!
//! Everything here works in units of the interferometer quantum-noise RIN,
//! so the requirement is a pure margin statement: backscatter must sit a
//! factor `qn_margin` below quantum noise, tightened by another factor
//! `squeezing_factor` for the quantum-noise reduction that injected
//! squeezing will bring. The expected carrier-power increase enters on the
//! projection side instead: spurious power scales with the carrier, so the
//! backscatter-to-quantum-noise ratio grows as `sqrt(carrier_scale)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementConfig {
    /// Backscatter must stay this factor below quantum noise.
    pub qn_margin: f64,
    /// Amplitude factor for the quantum-noise reduction from squeezing.
    pub squeezing_factor: f64,
    /// Expected increase of carrier power toward the output chain.
    pub carrier_scale: f64,
}

impl Default for RequirementConfig {
    fn default() -> Self {
        RequirementConfig {
            qn_margin: 10.0,
            squeezing_factor: 2.0,
            carrier_scale: 7.0,
        }
    }
}

impl RequirementConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("qn_margin", self.qn_margin),
            ("squeezing_factor", self.squeezing_factor),
            ("carrier_scale", self.carrier_scale),
        ] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be finite and >= 1"));
            }
        }
        Ok(())
    }
}

/// A spectrum expressed relative to the quantum-noise RIN (dimensionless).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelQnSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub rel_qn: Vec<f64>,
}

impl RelQnSpectrum {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies_hz.len() != self.rel_qn.len() {
            return Err(Error::invalid(
                "rel_qn_spectrum",
                "frequency and value arrays differ in length",
            ));
        }
        if self.frequencies_hz.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "rel_qn_spectrum",
                "frequencies must be strictly increasing",
            ));
        }
        if self.rel_qn.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("rel_qn_spectrum", "values must be >= 0"));
        }
        Ok(())
    }
}

/// One measured background point, relative to quantum noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundPoint {
    pub frequency_hz: f64,
    pub rel_qn: f64,
    /// The induced scatter was not measurable at this point; the value is
    /// an upper bound, not a detection.
    pub upper_limit: bool,
}

/// Bundled single-frequency background estimates, reconstructed from the
/// published description (factor 7-10 below quantum noise under 300 Hz,
/// with the 75 Hz point an upper limit). Order-of-magnitude anchors for
/// requirement comparisons, not digitized data.
pub fn bundled_background_points() -> Vec<BackgroundPoint> {
    let pt = |frequency_hz: f64, rel_qn: f64, upper_limit: bool| BackgroundPoint {
        frequency_hz,
        rel_qn,
        upper_limit,
    };
    vec![
        pt(75.0, 1.0 / 7.0, true),
        pt(100.0, 0.12, false),
        pt(130.0, 0.105, false),
        pt(160.0, 0.118, false),
        pt(200.0, 0.125, false),
        pt(250.0, 0.11, false),
        pt(270.0, 0.13, false),
        pt(300.0, 0.14, false),
    ]
}

impl From<&[BackgroundPoint]> for RelQnSpectrum {
    fn from(points: &[BackgroundPoint]) -> Self {
        RelQnSpectrum {
            frequencies_hz: points.iter().map(|p| p.frequency_hz).collect(),
            rel_qn: points.iter().map(|p| p.rel_qn).collect(),
        }
    }
}

/// Default report bands, Hz: below 40, 40-60, above 60.
pub const DEFAULT_BANDS: [(f64, f64); 3] = [(0.0, 40.0), (40.0, 60.0), (60.0, f64::INFINITY)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginEntry {
    pub frequency_hz: f64,
    pub estimated_rel_qn: f64,
    pub requirement_rel_qn: f64,
    /// estimated / requirement; above 1 means isolation is missing.
    pub deficit_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDeficit {
    pub band_hz: (f64, f64),
    /// Largest per-frequency deficit inside the band; 0 when the band holds
    /// no points.
    pub max_deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub entries: Vec<MarginEntry>,
    pub bands: Vec<BandDeficit>,
    pub config: RequirementConfig,
    /// How the carrier-power factor was composed into the comparison.
    pub composition: String,
}

/// Requirement level relative to quantum noise at each frequency:
/// `1 / (qn_margin * squeezing_factor)`, flat by construction. The carrier
/// factor belongs to [`project_backscatter`].
pub fn requirement_curve(
    config: &RequirementConfig,
    frequencies_hz: &[f64],
) -> Result<RelQnSpectrum> {
    config.validate()?;
    let level = 1.0 / (config.qn_margin * config.squeezing_factor);
    Ok(RelQnSpectrum {
        frequencies_hz: frequencies_hz.to_vec(),
        rel_qn: vec![level; frequencies_hz.len()],
    })
}

/// Scale a measured backscatter-to-quantum-noise spectrum to the projected
/// operating point: spurious power (and with it P_s) follows the carrier,
/// and the ratio grows as `sqrt(P_s)`, so the spectrum scales by
/// `sqrt(carrier_scale)`.
pub fn project_backscatter(
    measured: &RelQnSpectrum,
    config: &RequirementConfig,
) -> Result<RelQnSpectrum> {
    config.validate()?;
    measured.validate()?;
    let scale = config.carrier_scale.sqrt();
    Ok(RelQnSpectrum {
        frequencies_hz: measured.frequencies_hz.clone(),
        rel_qn: measured.rel_qn.iter().map(|v| v * scale).collect(),
    })
}

/// Per-frequency deficit of projected backscatter against the requirement,
/// with maxima over the given bands (half-open, `lo <= f < hi`).
pub fn isolation_deficit(
    projected: &RelQnSpectrum,
    requirement: &RelQnSpectrum,
    config: &RequirementConfig,
    bands: &[(f64, f64)],
) -> Result<MarginReport> {
    projected.validate()?;
    requirement.validate()?;
    if projected.frequencies_hz != requirement.frequencies_hz {
        return Err(Error::GridMismatch(
            "projected and requirement spectra must share a frequency grid".into(),
        ));
    }
    let mut entries = Vec::with_capacity(projected.frequencies_hz.len());
    for ((&f, &est), &req) in projected
        .frequencies_hz
        .iter()
        .zip(&projected.rel_qn)
        .zip(&requirement.rel_qn)
    {
        if !(req > 0.0) {
            return Err(Error::invalid(
                "requirement",
                format!("requirement must be > 0 at {f} Hz"),
            ));
        }
        entries.push(MarginEntry {
            frequency_hz: f,
            estimated_rel_qn: est,
            requirement_rel_qn: req,
            deficit_factor: est / req,
        });
    }
    let bands = bands
        .iter()
        .map(|&(lo, hi)| BandDeficit {
            band_hz: (lo, hi),
            max_deficit: entries
                .iter()
                .filter(|e| e.frequency_hz >= lo && e.frequency_hz < hi)
                .map(|e| e.deficit_factor)
                .fold(0.0, f64::max),
        })
        .collect();
    Ok(MarginReport {
        entries,
        bands,
        config: *config,
        composition: format!(
            "carrier_scale {} applied as sqrt({}) = {:.4} on the projected \
             backscatter (P_s follows the carrier; the quantum-noise ratio \
             scales as sqrt(P_s)); requirement = 1/(qn_margin * squeezing_factor)",
            config.carrier_scale,
            config.carrier_scale,
            config.carrier_scale.sqrt()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_requirement_is_flat_one_twentieth() {
        let freqs = vec![10.0, 20.0, 100.0, 300.0];
        let req = requirement_curve(&RequirementConfig::default(), &freqs).unwrap();
        assert!(req.rel_qn.iter().all(|&v| v == 0.05));
        let unity = requirement_curve(
            &RequirementConfig {
                qn_margin: 1.0,
                squeezing_factor: 1.0,
                carrier_scale: 1.0,
            },
            &freqs,
        )
        .unwrap();
        assert!(unity.rel_qn.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn requirement_halves_with_squeezing_factor() {
        let freqs = vec![10.0, 100.0];
        let base = RequirementConfig {
            squeezing_factor: 1.0,
            ..RequirementConfig::default()
        };
        let tight = RequirementConfig::default();
        let a = requirement_curve(&base, &freqs).unwrap();
        let b = requirement_curve(&tight, &freqs).unwrap();
        for (x, y) in a.rel_qn.iter().zip(&b.rel_qn) {
            assert_eq!(*y, x / 2.0);
        }
    }

    #[test]
    fn projection_scales_by_sqrt_carrier() {
        let measured = RelQnSpectrum {
            frequencies_hz: vec![100.0, 200.0],
            rel_qn: vec![0.1, 0.1],
        };
        let identity = project_backscatter(
            &measured,
            &RequirementConfig {
                carrier_scale: 1.0,
                ..RequirementConfig::default()
            },
        )
        .unwrap();
        assert_eq!(identity.rel_qn, measured.rel_qn);
        let seven = project_backscatter(&measured, &RequirementConfig::default()).unwrap();
        for v in &seven.rel_qn {
            assert!((v - 0.1 * 7f64.sqrt()).abs() < 1e-15);
            assert!((v - 0.264_575).abs() < 1e-5);
        }
        let four = project_backscatter(
            &measured,
            &RequirementConfig {
                carrier_scale: 4.0,
                ..RequirementConfig::default()
            },
        )
        .unwrap();
        for (v, m) in four.rel_qn.iter().zip(&measured.rel_qn) {
            assert_eq!(*v, 2.0 * m);
        }
    }

    #[test]
    fn projection_composes_multiplicatively() {
        let measured = RelQnSpectrum {
            frequencies_hz: vec![50.0, 100.0],
            rel_qn: vec![0.3, 0.05],
        };
        let cfg = |s: f64| RequirementConfig {
            carrier_scale: s,
            ..RequirementConfig::default()
        };
        let ab = project_backscatter(
            &project_backscatter(&measured, &cfg(2.0)).unwrap(),
            &cfg(3.5),
        )
        .unwrap();
        let direct = project_backscatter(&measured, &cfg(7.0)).unwrap();
        for (x, y) in ab.rel_qn.iter().zip(&direct.rel_qn) {
            assert!((x - y).abs() <= 1e-15 * y);
        }
    }

    #[test]
    fn deficit_is_unity_when_projected_meets_requirement() {
        let freqs = vec![20.0, 50.0, 100.0];
        let cfg = RequirementConfig::default();
        let req = requirement_curve(&cfg, &freqs).unwrap();
        let report = isolation_deficit(&req, &req, &cfg, &DEFAULT_BANDS).unwrap();
        assert!(report.entries.iter().all(|e| e.deficit_factor == 1.0));
        assert!(report.bands.iter().all(|b| b.max_deficit == 1.0));
    }

    #[test]
    fn deficit_low_frequency_oracle() {
        // 2x quantum noise at 20 Hz, defaults: 2 sqrt(7) / 0.05 = 105.8.
        let cfg = RequirementConfig::default();
        let measured = RelQnSpectrum {
            frequencies_hz: vec![20.0],
            rel_qn: vec![2.0],
        };
        let projected = project_backscatter(&measured, &cfg).unwrap();
        let req = requirement_curve(&cfg, &measured.frequencies_hz).unwrap();
        let report = isolation_deficit(&projected, &req, &cfg, &DEFAULT_BANDS).unwrap();
        let deficit = report.entries[0].deficit_factor;
        assert!((deficit - 105.83).abs() < 0.01);
        assert!((report.bands[0].max_deficit - deficit).abs() < 1e-12);
        assert_eq!(report.bands[2].max_deficit, 0.0);
    }

    #[test]
    fn deficit_requires_common_grid() {
        let a = RelQnSpectrum {
            frequencies_hz: vec![10.0, 20.0],
            rel_qn: vec![1.0, 1.0],
        };
        let b = RelQnSpectrum {
            frequencies_hz: vec![10.0, 30.0],
            rel_qn: vec![1.0, 1.0],
        };
        assert!(matches!(
            isolation_deficit(&a, &b, &RequirementConfig::default(), &DEFAULT_BANDS),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn bundled_points_sit_factor_7_to_10_below_quantum_noise() {
        let points = bundled_background_points();
        assert!(points
            .iter()
            .any(|p| p.upper_limit && p.frequency_hz == 75.0));
        for p in points.iter().filter(|p| !p.upper_limit) {
            assert!(p.rel_qn <= 1.0 / 7.0 + 1e-12 && p.rel_qn >= 1.0 / 10.0 - 1e-12);
            assert!(p.frequency_hz >= 100.0 && p.frequency_hz <= 300.0);
        }
    }
}
