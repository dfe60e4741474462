//! CSV and JSON sidecar formats.
//!
//! Files carry SI units only (watts, meters, Hz, 1/rtHz); each CSV gets a
//! JSON sidecar naming the units so no implicit milli/femto scaling ever
//! hides in a file. Floats are printed with 17 significant digits, which
//! round-trips every f64 bit-exactly and makes reruns byte-comparable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::spectral::{MotionSpectrum, RinSpectrum};
use crate::synth::TimeSeries;

/// 17 significant digits: lossless decimal form of an f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_float(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| {
        Error::Format(format!(
            "{}:{line}: cannot parse `{s}` as a number: {e}",
            path.display()
        ))
    })
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<(f64, f64)>> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == header => {}
        Some((_, first)) => {
            return Err(Error::Format(format!(
                "{}: expected header `{header}`, found `{first}`",
                path.display()
            )))
        }
        None => return Err(Error::Format(format!("{}: empty file", path.display()))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Format(format!(
                    "{}:{}: expected two comma-separated fields",
                    path.display(),
                    i + 1
                )))
            }
        };
        rows.push((parse_float(a, path, i + 1)?, parse_float(b, path, i + 1)?));
    }
    Ok(rows)
}

/// Sidecar path convention: the CSV path with a `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Sidecar for a time-series CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesSidecar {
    /// Units of the value column ("W" for power, "m" for displacement).
    pub units: String,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Echo of the configuration that produced the series.
    #[serde(default)]
    pub config: Value,
    /// Manifest file this artifact belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

/// Sidecar for a spectrum CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    /// Units of the asd column ("Hz^-1/2" for RIN, "m Hz^-1/2" for motion).
    pub units: String,
    pub resolution_hz: f64,
    pub averages: usize,
    pub window: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let content = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&content)?)
}

pub fn write_time_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    series.validate()?;
    let mut out = String::with_capacity(series.samples.len() * 48 + 16);
    out.push_str("time,value\n");
    for (i, v) in series.samples.iter().enumerate() {
        let t = series.start_time_s + i as f64 / series.sample_rate_hz;
        out.push_str(&fmt_float(t));
        out.push(',');
        out.push_str(&fmt_float(*v));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a time series back, inferring the sample rate from the time column.
pub fn read_time_series_csv(path: &Path) -> Result<TimeSeries> {
    let rows = read_rows(path, "time,value")?;
    if rows.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least 2 samples",
            path.display()
        )));
    }
    let dt = rows[1].0 - rows[0].0;
    if !(dt > 0.0) {
        return Err(Error::Format(format!(
            "{}: time column must be strictly increasing",
            path.display()
        )));
    }
    for w in rows.windows(2) {
        let step = w[1].0 - w[0].0;
        if (step - dt).abs() > 1e-6 * dt {
            return Err(Error::Format(format!(
                "{}: time column is not uniformly sampled",
                path.display()
            )));
        }
    }
    Ok(TimeSeries {
        samples: rows.iter().map(|r| r.1).collect(),
        sample_rate_hz: 1.0 / dt,
        start_time_s: rows[0].0,
    })
}

pub fn write_rin_spectrum_csv(path: &Path, spectrum: &RinSpectrum) -> Result<()> {
    spectrum.validate()?;
    write_spectrum_rows(path, &spectrum.frequencies_hz, &spectrum.asd)
}

/// Read a RIN spectrum; `averages` comes from the sidecar when present.
pub fn read_rin_spectrum_csv(path: &Path) -> Result<RinSpectrum> {
    let rows = read_rows(path, "frequency,asd")?;
    if rows.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least 2 bins",
            path.display()
        )));
    }
    let averages = read_json::<SpectrumSidecar>(&sidecar_path(path))
        .map(|s| s.averages)
        .unwrap_or(1);
    let spectrum = RinSpectrum {
        resolution_hz: rows[1].0 - rows[0].0,
        frequencies_hz: rows.iter().map(|r| r.0).collect(),
        asd: rows.iter().map(|r| r.1).collect(),
        averages,
    };
    spectrum.validate()?;
    Ok(spectrum)
}

pub fn write_motion_spectrum_csv(path: &Path, spectrum: &MotionSpectrum) -> Result<()> {
    spectrum.validate()?;
    write_spectrum_rows(path, &spectrum.frequencies_hz, &spectrum.displacement_asd)
}

pub fn read_motion_spectrum_csv(path: &Path) -> Result<MotionSpectrum> {
    let rows = read_rows(path, "frequency,asd")?;
    let spectrum = MotionSpectrum {
        frequencies_hz: rows.iter().map(|r| r.0).collect(),
        displacement_asd: rows.iter().map(|r| r.1).collect(),
    };
    spectrum.validate()?;
    Ok(spectrum)
}

fn write_spectrum_rows(path: &Path, frequencies: &[f64], values: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(frequencies.len() * 48 + 16);
    out.push_str("frequency,asd\n");
    for (f, v) in frequencies.iter().zip(values) {
        out.push_str(&fmt_float(*f));
        out.push(',');
        out.push_str(&fmt_float(*v));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
