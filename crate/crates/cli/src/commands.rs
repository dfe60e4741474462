//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use backscatter_core::io;
use backscatter_core::opo::{to_db, BudgetMeasurements, Measured, OpoParams};
use backscatter_core::projection::{RelQnSpectrum, RequirementConfig};
use backscatter_core::spectral::hann_enbw_hz;
use backscatter_core::{
    bundled_background_points, estimate_motion_spectrum, estimate_rin_spectrum,
    infer_backscatter_power, isolation_deficit, mitigation_whatif, project_backscatter,
    requirement_curve, scatter_budget, synthesize_displacement, synthesize_shelf_drive,
    synthesize_small_motion, CarrierState, DriveConfig, DriveKind, ScatterPath, ShelfFitResult,
    ShotNoise,
};

use crate::manifest::{manifest_name, RunManifest};

/// Relative output paths land in `$BACKSCATTER_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("BACKSCATTER_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn prepare_out(path: &Path) -> anyhow::Result<PathBuf> {
    let path = resolve_out(path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Large sinusoidal phase modulation (fringe-wrapping shelf).
    Shelf,
    /// Small single-frequency displacement.
    Tone,
    /// Seeded stochastic displacement from an ASD shape.
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

/// Resolved simulation configuration; the JSON config file uses exactly
/// this schema and flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub carrier: CarrierState,
    pub scatter: ScatterPath,
    pub drive: DriveConfig,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub shot_noise: ShotNoise,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let wavelength_m = 1.064e-6;
        SimulateConfig {
            carrier: CarrierState {
                mean_power_w: 16.1e-3,
                wavelength_m,
                photodiode_efficiency: 0.96,
                squeezing_path_efficiency: 0.38,
            },
            scatter: ScatterPath {
                backscatter_power_w: 260e-15,
                spurious_incident_power_w: 0.7e-6,
                mode_match_fraction: 0.11,
                // sin(4 pi Z_s / lambda) = 1/sqrt(2): the linear-term
                // operating point.
                static_displacement_m: wavelength_m / 16.0,
                fluctuating_displacement_m: 0.0,
            },
            drive: DriveConfig {
                kind: DriveKind::SinusoidalPhase {
                    frequency_hz: 1.0,
                    modulation_depth_rad: 173.0,
                    static_phase_rad: None,
                    phase_drift_rad_per_s: None,
                },
                seed: 1,
            },
            sample_rate_hz: 2000.0,
            duration_s: 600.0,
            shot_noise: ShotNoise::QuantumLimited,
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON config file (SimulateConfig schema); flags override fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drive kind; resets the drive section to that kind's defaults before
    /// applying drive flags.
    #[arg(long, value_enum)]
    kind: Option<SimKind>,
    /// Mean carrier power, W.
    #[arg(long)]
    carrier_power: Option<f64>,
    /// Carrier wavelength, m.
    #[arg(long)]
    wavelength: Option<f64>,
    /// Photodiode efficiency (0, 1].
    #[arg(long)]
    eta_pd: Option<f64>,
    /// Squeezing-path efficiency (0, 1].
    #[arg(long)]
    eta_sqz: Option<f64>,
    /// Backscatter power P_s, W.
    #[arg(long)]
    ps: Option<f64>,
    /// Backscatter-to-carrier power ratio P_s / P_c (alternative to --ps).
    #[arg(long, conflicts_with = "ps")]
    ratio: Option<f64>,
    /// Static scatter-path displacement Z_s, m.
    #[arg(long)]
    static_displacement: Option<f64>,
    /// Modulation depth, rad (shelf drive).
    #[arg(long)]
    phi_m: Option<f64>,
    /// Drive frequency, Hz (shelf drive).
    #[arg(long)]
    f_m: Option<f64>,
    /// Fixed offset phase, rad (shelf drive; default: seeded draw).
    #[arg(long)]
    static_phase: Option<f64>,
    /// Offset-phase drift, rad/s (shelf drive).
    #[arg(long)]
    phase_drift: Option<f64>,
    /// Drive frequency, Hz (tone drive).
    #[arg(long)]
    drive_freq: Option<f64>,
    /// Drive amplitude, m (tone drive).
    #[arg(long)]
    amplitude: Option<f64>,
    /// Motion-spectrum CSV (frequency,asd in m/rtHz) shaping a background
    /// drive.
    #[arg(long)]
    background_asd: Option<PathBuf>,
    /// Sample rate, Hz.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Duration, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Quantum-limited shot noise on the series.
    #[arg(long, value_enum)]
    shot_noise: Option<OnOff>,
    /// Also write the displacement trace (tone/background drives).
    #[arg(long)]
    displacement_out: Option<PathBuf>,
    /// Output series CSV.
    #[arg(long)]
    out: PathBuf,
}

fn build_simulate_config(args: &SimulateArgs) -> anyhow::Result<SimulateConfig> {
    let mut cfg: SimulateConfig = match &args.config {
        Some(path) => {
            io::read_json(path).with_context(|| format!("reading config {}", path.display()))?
        }
        None => SimulateConfig::default(),
    };
    if let Some(kind) = args.kind {
        let seed = cfg.drive.seed;
        cfg.drive = DriveConfig {
            kind: match kind {
                SimKind::Shelf => DriveKind::SinusoidalPhase {
                    frequency_hz: 1.0,
                    modulation_depth_rad: 173.0,
                    static_phase_rad: None,
                    phase_drift_rad_per_s: None,
                },
                SimKind::Tone => DriveKind::TonalDisplacement {
                    frequency_hz: 270.0,
                    amplitude_m: 1.0e-9,
                },
                SimKind::Background => DriveKind::StochasticBackground {
                    asd_shape: Vec::new(),
                },
            },
            seed,
        };
    }
    if let Some(v) = args.carrier_power {
        cfg.carrier.mean_power_w = v;
    }
    if let Some(v) = args.wavelength {
        cfg.carrier.wavelength_m = v;
    }
    if let Some(v) = args.eta_pd {
        cfg.carrier.photodiode_efficiency = v;
    }
    if let Some(v) = args.eta_sqz {
        cfg.carrier.squeezing_path_efficiency = v;
    }
    if let Some(v) = args.ps {
        cfg.scatter.backscatter_power_w = v;
    }
    if let Some(r) = args.ratio {
        cfg.scatter.backscatter_power_w = r * cfg.carrier.mean_power_w;
    }
    if let Some(v) = args.static_displacement {
        cfg.scatter.static_displacement_m = v;
    }
    match &mut cfg.drive.kind {
        DriveKind::SinusoidalPhase {
            frequency_hz,
            modulation_depth_rad,
            static_phase_rad,
            phase_drift_rad_per_s,
        } => {
            if let Some(v) = args.f_m {
                *frequency_hz = v;
            }
            if let Some(v) = args.phi_m {
                *modulation_depth_rad = v;
            }
            if let Some(v) = args.static_phase {
                *static_phase_rad = Some(v);
            }
            if let Some(v) = args.phase_drift {
                *phase_drift_rad_per_s = Some(v);
            }
            for (flag, name) in [
                (args.drive_freq.is_some(), "--drive-freq"),
                (args.amplitude.is_some(), "--amplitude"),
                (args.background_asd.is_some(), "--background-asd"),
            ] {
                if flag {
                    bail!("{name} does not apply to a shelf drive");
                }
            }
        }
        DriveKind::TonalDisplacement {
            frequency_hz,
            amplitude_m,
        } => {
            if let Some(v) = args.drive_freq {
                *frequency_hz = v;
            }
            if let Some(v) = args.amplitude {
                *amplitude_m = v;
            }
            for (flag, name) in [
                (args.phi_m.is_some(), "--phi-m"),
                (args.f_m.is_some(), "--f-m"),
                (args.background_asd.is_some(), "--background-asd"),
            ] {
                if flag {
                    bail!("{name} does not apply to a tone drive");
                }
            }
        }
        DriveKind::StochasticBackground { asd_shape } => {
            if let Some(path) = &args.background_asd {
                let motion = io::read_motion_spectrum_csv(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                *asd_shape = motion
                    .frequencies_hz
                    .iter()
                    .copied()
                    .zip(motion.displacement_asd.iter().copied())
                    .collect();
            }
            if asd_shape.is_empty() {
                bail!("background drive needs --background-asd or a config with asd_shape");
            }
        }
    }
    if let Some(v) = args.sample_rate {
        cfg.sample_rate_hz = v;
    }
    if let Some(v) = args.duration {
        cfg.duration_s = v;
    }
    if let Some(v) = args.seed {
        cfg.drive.seed = v;
    }
    if let Some(v) = args.shot_noise {
        cfg.shot_noise = match v {
            OnOff::On => ShotNoise::QuantumLimited,
            OnOff::Off => ShotNoise::Off,
        };
    }
    Ok(cfg)
}

pub fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = build_simulate_config(&args)?;
    let out = prepare_out(&args.out)?;

    let series = match cfg.drive.kind {
        DriveKind::SinusoidalPhase { .. } => synthesize_shelf_drive(
            &cfg.carrier,
            &cfg.scatter,
            &cfg.drive,
            cfg.sample_rate_hz,
            cfg.duration_s,
            cfg.shot_noise,
        )?,
        _ => synthesize_small_motion(
            &cfg.carrier,
            &cfg.scatter,
            &cfg.drive,
            cfg.sample_rate_hz,
            cfg.duration_s,
            cfg.shot_noise,
        )?,
    };

    let config_echo = serde_json::to_value(&cfg)?;
    let mut manifest = RunManifest::new("simulate", config_echo.clone())
        .seed(cfg.drive.seed)
        .output(&out);
    io::write_time_series_csv(&out, &series)?;
    io::write_json(
        &io::sidecar_path(&out),
        &io::SeriesSidecar {
            units: "W".into(),
            sample_rate_hz: series.sample_rate_hz,
            start_time_s: series.start_time_s,
            seed: Some(cfg.drive.seed),
            config: config_echo.clone(),
            manifest: Some(manifest_name(&out)),
        },
    )?;
    manifest = manifest.output(&io::sidecar_path(&out));

    if let Some(disp_out) = &args.displacement_out {
        let disp_out = prepare_out(disp_out)?;
        let displacement = synthesize_displacement(&cfg.drive, cfg.sample_rate_hz, cfg.duration_s)?;
        io::write_time_series_csv(&disp_out, &displacement)?;
        io::write_json(
            &io::sidecar_path(&disp_out),
            &io::SeriesSidecar {
                units: "m".into(),
                sample_rate_hz: displacement.sample_rate_hz,
                start_time_s: displacement.start_time_s,
                seed: Some(cfg.drive.seed),
                config: config_echo,
                manifest: Some(manifest_name(&out)),
            },
        )?;
        manifest = manifest
            .output(&disp_out)
            .output(&io::sidecar_path(&disp_out));
    }
    manifest.write(&out)?;

    println!(
        "simulate: {} samples at {} Hz -> {} (mean {:.6e} W)",
        series.samples.len(),
        series.sample_rate_hz,
        out.display(),
        series.mean()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumKind {
    /// RIN ASD of a power series, 1/rtHz.
    Rin,
    /// Displacement ASD of a motion series, m/rtHz.
    Motion,
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Input time-series CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Welch segment length, samples.
    #[arg(long, default_value_t = 2048)]
    segment: usize,
    /// Segment overlap fraction [0, 0.9].
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, value_enum, default_value_t = SpectrumKind::Rin)]
    kind: SpectrumKind,
    /// Output spectrum CSV.
    #[arg(long)]
    out: PathBuf,
}

pub fn spectrum(args: SpectrumArgs) -> anyhow::Result<()> {
    let out = prepare_out(&args.out)?;
    let series = io::read_time_series_csv(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let config = json!({
        "segment": args.segment,
        "overlap": args.overlap,
        "kind": match args.kind { SpectrumKind::Rin => "rin", SpectrumKind::Motion => "motion" },
        "window": "hann",
        "enbw_hz": hann_enbw_hz(args.segment, series.sample_rate_hz),
    });
    let (resolution_hz, averages, units) = match args.kind {
        SpectrumKind::Rin => {
            let spec = estimate_rin_spectrum(&series, args.segment, args.overlap)?;
            io::write_rin_spectrum_csv(&out, &spec)?;
            (spec.resolution_hz, spec.averages, "Hz^-1/2")
        }
        SpectrumKind::Motion => {
            let spec = estimate_motion_spectrum(&series, args.segment, args.overlap)?;
            io::write_motion_spectrum_csv(&out, &spec)?;
            (
                spec.frequencies_hz[1] - spec.frequencies_hz[0],
                (series.samples.len() - args.segment) / (args.segment / 2) + 1,
                "m Hz^-1/2",
            )
        }
    };
    io::write_json(
        &io::sidecar_path(&out),
        &io::SpectrumSidecar {
            units: units.into(),
            resolution_hz,
            averages,
            window: "hann".into(),
            manifest: Some(manifest_name(&out)),
        },
    )?;
    RunManifest::new("spectrum", config)
        .input(&args.input)
        .output(&out)
        .output(&io::sidecar_path(&out))
        .write(&out)?;
    println!(
        "spectrum: {} -> {} (resolution {resolution_hz} Hz, {averages} averages)",
        args.input.display(),
        out.display()
    );
    Ok(())
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("band `{s}` must be LO:HI in Hz"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("band low: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("band high: {e}"))?;
    if !(lo < hi) {
        return Err(format!("band `{s}`: low edge must be below high edge"));
    }
    Ok((lo, hi))
}

#[derive(Args)]
pub struct FitShelfArgs {
    /// Input RIN spectrum CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Modulation depth of the applied drive, rad.
    #[arg(long)]
    phi_m: f64,
    /// Drive frequency, Hz.
    #[arg(long)]
    f_m: f64,
    /// Fit band LO:HI, Hz.
    #[arg(long, value_parser = parse_band)]
    band: (f64, f64),
    /// Mean carrier power, W; adds the absolute backscatter power to the
    /// result.
    #[arg(long)]
    carrier_power: Option<f64>,
    /// Also write the fitted shelf model on the measured grid (CSV), for
    /// overlay plots.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Output fit record JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct FitRecord {
    #[serde(flatten)]
    fit: ShelfFitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    backscatter_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backscatter_power_uncertainty_w: Option<f64>,
    manifest: String,
}

pub fn fit_shelf_cmd(args: FitShelfArgs) -> anyhow::Result<()> {
    let out = prepare_out(&args.out)?;
    let spectrum = io::read_rin_spectrum_csv(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let fit = backscatter_core::fit_shelf(&spectrum, args.phi_m, args.f_m, args.band)?;
    let power = match args.carrier_power {
        Some(p_c) => {
            let carrier = CarrierState {
                mean_power_w: p_c,
                wavelength_m: 1.064e-6,
                photodiode_efficiency: 0.96,
                squeezing_path_efficiency: 0.38,
            };
            Some(infer_backscatter_power(&fit, &carrier)?)
        }
        None => None,
    };
    let record = FitRecord {
        fit: fit.clone(),
        backscatter_power_w: power.map(|p| p.watts),
        backscatter_power_uncertainty_w: power.map(|p| p.uncertainty_w),
        manifest: manifest_name(&out),
    };
    io::write_json(&out, &record)?;
    let mut manifest = RunManifest::new(
        "fit-shelf",
        json!({
            "phi_m_rad": args.phi_m,
            "f_m_hz": args.f_m,
            "band_hz": [args.band.0, args.band.1],
            "carrier_power_w": args.carrier_power,
        }),
    )
    .input(&args.input)
    .output(&out);
    if let Some(model_out) = &args.model_out {
        let model_out = prepare_out(model_out)?;
        let model = backscatter_core::shelf_model_asd(
            fit.ratio,
            args.phi_m,
            args.f_m,
            &spectrum.frequencies_hz,
        )?;
        io::write_rin_spectrum_csv(&model_out, &model)?;
        io::write_json(
            &io::sidecar_path(&model_out),
            &io::SpectrumSidecar {
                units: "Hz^-1/2".into(),
                resolution_hz: model.resolution_hz,
                averages: 0,
                window: "analytic".into(),
                manifest: Some(manifest_name(&out)),
            },
        )?;
        manifest = manifest
            .output(&model_out)
            .output(&io::sidecar_path(&model_out));
    }
    manifest.write(&out)?;
    println!(
        "fit-shelf: ratio {:.4e} +- {:.1e}{}{}",
        fit.ratio,
        fit.ratio_uncertainty,
        if fit.upper_limit {
            " (upper limit)"
        } else {
            ""
        },
        match power {
            Some(p) => format!(", P_s {:.4e} W", p.watts),
            None => String::new(),
        }
    );
    Ok(())
}

pub use fit_shelf_cmd as fit_shelf;

#[derive(Args)]
pub struct ScaleBackgroundArgs {
    /// Driven RIN spectrum CSV.
    #[arg(long)]
    driven_rin: PathBuf,
    /// Driven motion spectrum CSV, m/rtHz.
    #[arg(long)]
    driven_motion: PathBuf,
    /// Background motion spectrum CSV, m/rtHz.
    #[arg(long)]
    background_motion: PathBuf,
    /// Evaluation frequency, Hz.
    #[arg(long)]
    at: f64,
    /// Output JSON record.
    #[arg(long)]
    out: PathBuf,
}

pub fn scale_background_cmd(args: ScaleBackgroundArgs) -> anyhow::Result<()> {
    let out = prepare_out(&args.out)?;
    let driven_rin = io::read_rin_spectrum_csv(&args.driven_rin)
        .with_context(|| format!("reading {}", args.driven_rin.display()))?;
    let driven_motion = io::read_motion_spectrum_csv(&args.driven_motion)
        .with_context(|| format!("reading {}", args.driven_motion.display()))?;
    let background_motion = io::read_motion_spectrum_csv(&args.background_motion)
        .with_context(|| format!("reading {}", args.background_motion.display()))?;
    let background_rin = backscatter_core::scale_background(
        &driven_rin,
        &driven_motion,
        &background_motion,
        args.at,
    )?;
    let record = json!({
        "at_hz": args.at,
        "driven_rin": driven_rin.asd_at(args.at)?,
        "driven_motion_asd_m": driven_motion.asd_at(args.at)?,
        "background_motion_asd_m": background_motion.asd_at(args.at)?,
        "background_rin": background_rin,
        "manifest": manifest_name(&out),
    });
    io::write_json(&out, &record)?;
    RunManifest::new("scale-background", json!({ "at_hz": args.at }))
        .input(&args.driven_rin)
        .input(&args.driven_motion)
        .input(&args.background_motion)
        .output(&out)
        .write(&out)?;
    println!(
        "scale-background: RIN_bg({}) = {:.4e} /rtHz -> {}",
        args.at,
        background_rin,
        out.display()
    );
    Ok(())
}

pub use scale_background_cmd as scale_background;

#[derive(Args)]
pub struct BudgetArgs {
    /// Backscatter power P_s, W.
    #[arg(long)]
    ps: f64,
    /// Squeezing-path measurement efficiency.
    #[arg(long)]
    eta: f64,
    /// Mode-matched fraction of the spurious power.
    #[arg(long)]
    rho: f64,
    /// Spurious power incident on the OPO, W.
    #[arg(long)]
    psp: f64,
    /// Input coupler power reflectivity.
    #[arg(long)]
    rin: f64,
    /// Normalized parametric interaction strength.
    #[arg(long)]
    x: f64,
    /// Cavity waist at the crystal, m.
    #[arg(long)]
    waist: f64,
    /// Pump-relative phase of circulating scatter, rad.
    #[arg(long, default_value_t = 0.0)]
    theta_sc: f64,
    /// Carrier wavelength, m.
    #[arg(long, default_value_t = 1.064e-6)]
    wavelength: f64,
    /// 1-sigma uncertainties on the measured inputs.
    #[arg(long, default_value_t = 0.0)]
    ps_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    eta_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    rho_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    psp_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    rin_sigma: f64,
    /// What-if: input coupler reflectivity after a mitigation change.
    #[arg(long)]
    whatif_rin: Option<f64>,
    /// What-if: waist after a mitigation change, m.
    #[arg(long)]
    whatif_waist: Option<f64>,
    /// What-if: interaction strength after a mitigation change.
    #[arg(long)]
    whatif_x: Option<f64>,
    /// Output JSON record.
    #[arg(long)]
    out: PathBuf,
}

pub fn budget(args: BudgetArgs) -> anyhow::Result<()> {
    let out = prepare_out(&args.out)?;
    let opo = OpoParams {
        input_coupler_reflectivity: args.rin,
        waist_m: args.waist,
        interaction_strength: args.x,
        pump_relative_phase_rad: args.theta_sc,
        wavelength_m: args.wavelength,
    };
    let measurements = BudgetMeasurements {
        backscatter_w: Measured {
            value: args.ps,
            sigma: args.ps_sigma,
        },
        squeezing_path_efficiency: Measured {
            value: args.eta,
            sigma: args.eta_sigma,
        },
        mode_match_fraction: Measured {
            value: args.rho,
            sigma: args.rho_sigma,
        },
        spurious_w: Measured {
            value: args.psp,
            sigma: args.psp_sigma,
        },
        input_coupler_sigma: args.rin_sigma,
    };
    let budget = scatter_budget(&measurements, &opo)?;

    let mitigation =
        if args.whatif_rin.is_some() || args.whatif_waist.is_some() || args.whatif_x.is_some() {
            let mut changed = opo;
            if let Some(v) = args.whatif_rin {
                changed.input_coupler_reflectivity = v;
            }
            if let Some(v) = args.whatif_waist {
                changed.waist_m = v;
            }
            if let Some(v) = args.whatif_x {
                changed.interaction_strength = v;
            }
            let reduction = mitigation_whatif(&opo, &changed, budget.bsdf_per_sr)?;
            Some(json!({
                "changed": changed,
                "r_opo_reduction_factor": reduction,
                "r_opo_db_after": to_db(budget.r_opo / reduction),
            }))
        } else {
            None
        };

    let record = json!({
        "inputs": measurements,
        "opo": opo,
        "r_opo": budget.r_opo,
        "r_opo_db": budget.r_opo_db,
        "r_opo_rel_uncertainty": budget.r_opo_rel_uncertainty,
        "bsdf_per_sr": budget.bsdf_per_sr,
        "bsdf_per_sr_uncertainty": budget.bsdf_per_sr * budget.bsdf_rel_uncertainty,
        "solid_angle_sr": budget.solid_angle_sr,
        "mitigation": mitigation,
        "manifest": manifest_name(&out),
    });
    io::write_json(&out, &record)?;
    RunManifest::new("budget", serde_json::to_value(&record)?)
        .output(&out)
        .write(&out)?;
    println!(
        "budget: R_OPO {:.3e} ({:.2} dB), BSDF {:.3e} /sr -> {}",
        budget.r_opo,
        budget.r_opo_db,
        budget.bsdf_per_sr,
        out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct ProjectArgs {
    /// Background points: `bundled` or a CSV with header frequency,rel_qn.
    #[arg(long, default_value = "bundled")]
    points: String,
    /// Required margin below quantum noise.
    #[arg(long, default_value_t = 10.0)]
    qn_margin: f64,
    /// Amplitude factor for squeezing-improved quantum noise.
    #[arg(long, default_value_t = 2.0)]
    squeezing_factor: f64,
    /// Expected carrier-power increase factor.
    #[arg(long, default_value_t = 7.0)]
    carrier_scale: f64,
    /// Band edges (Hz) splitting the report bands, e.g. 40,60.
    #[arg(long, value_delimiter = ',', default_values_t = vec![40.0, 60.0])]
    band_edges: Vec<f64>,
    /// Output prefix: writes <prefix>.json and three <prefix>-*.csv traces.
    #[arg(long)]
    out: PathBuf,
}

fn read_points_csv(path: &Path) -> anyhow::Result<RelQnSpectrum> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "frequency,rel_qn" => {}
        other => bail!(
            "{}: expected header `frequency,rel_qn`, found {:?}",
            path.display(),
            other.map(|(_, h)| h)
        ),
    }
    let mut frequencies_hz = Vec::new();
    let mut rel_qn = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (f, v) = line
            .split_once(',')
            .with_context(|| format!("{}:{}: expected two fields", path.display(), i + 1))?;
        frequencies_hz.push(f.trim().parse::<f64>()?);
        rel_qn.push(v.trim().parse::<f64>()?);
    }
    Ok(RelQnSpectrum {
        frequencies_hz,
        rel_qn,
    })
}

pub fn project(args: ProjectArgs) -> anyhow::Result<()> {
    let out_json = prepare_out(&args.out.with_extension("json"))?;
    let config = RequirementConfig {
        qn_margin: args.qn_margin,
        squeezing_factor: args.squeezing_factor,
        carrier_scale: args.carrier_scale,
    };
    let measured = if args.points == "bundled" {
        RelQnSpectrum::from(bundled_background_points().as_slice())
    } else {
        read_points_csv(Path::new(&args.points))?
    };
    let mut edges = args.band_edges.clone();
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut bands = Vec::new();
    let mut lo = 0.0;
    for e in &edges {
        bands.push((lo, *e));
        lo = *e;
    }
    bands.push((lo, f64::INFINITY));

    let projected = project_backscatter(&measured, &config)?;
    let requirement = requirement_curve(&config, &measured.frequencies_hz)?;
    let report = isolation_deficit(&projected, &requirement, &config, &bands)?;

    let mut record = serde_json::to_value(&report)?;
    record["manifest"] = json!(manifest_name(&out_json));
    io::write_json(&out_json, &record)?;
    let stem = args.out.clone();
    let trace = |suffix: &str, values: &[f64]| -> anyhow::Result<PathBuf> {
        let path = prepare_out(&stem.with_extension(""))?;
        let path = path.with_file_name(format!(
            "{}-{suffix}.csv",
            stem.file_stem().unwrap_or_default().to_string_lossy()
        ));
        let mut body = String::from("frequency,value\n");
        for (f, v) in measured.frequencies_hz.iter().zip(values) {
            body.push_str(&io::fmt_float(*f));
            body.push(',');
            body.push_str(&io::fmt_float(*v));
            body.push('\n');
        }
        std::fs::write(&path, body)?;
        Ok(path)
    };
    let p1 = trace("projected", &projected.rel_qn)?;
    let p2 = trace("requirement", &requirement.rel_qn)?;
    let deficits: Vec<f64> = report.entries.iter().map(|e| e.deficit_factor).collect();
    let p3 = trace("deficit", &deficits)?;

    RunManifest::new("project", serde_json::to_value(config)?)
        .output(&out_json)
        .output(&p1)
        .output(&p2)
        .output(&p3)
        .write(&out_json)?;
    for band in &report.bands {
        println!(
            "project: band {:>6.1}-{:<6.1} Hz max deficit {:.2}",
            band.band_hz.0, band.band_hz.1, band.max_deficit
        );
    }
    println!("project: report -> {}", out_json.display());
    Ok(())
}

#[derive(Args)]
pub struct PlotDataArgs {
    /// Input spectrum CSVs (repeatable).
    #[arg(long = "trace")]
    traces: Vec<PathBuf>,
    /// Labels matching --trace order (default: file stems).
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Normalize every trace by this quantum-noise RIN, 1/rtHz.
    #[arg(long)]
    qn_ref: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn plot_data(args: PlotDataArgs) -> anyhow::Result<()> {
    if args.traces.is_empty() {
        eprintln!("warning: plot-data called with no traces; nothing to do");
        return Ok(());
    }
    if !args.labels.is_empty() && args.labels.len() != args.traces.len() {
        bail!(
            "got {} labels for {} traces",
            args.labels.len(),
            args.traces.len()
        );
    }
    if let Some(qn) = args.qn_ref {
        if !(qn > 0.0) {
            bail!("--qn-ref must be > 0");
        }
    }
    let out_dir = resolve_out(&args.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let legend_path = out_dir.join("legend.json");

    let mut legend = Vec::new();
    let mut manifest = RunManifest::new(
        "plot-data",
        json!({ "qn_ref": args.qn_ref, "normalized": args.qn_ref.is_some() }),
    );
    for (i, source) in args.traces.iter().enumerate() {
        let spectrum = io::read_rin_spectrum_csv(source)
            .with_context(|| format!("reading {}", source.display()))?;
        let label = args.labels.get(i).cloned().unwrap_or_else(|| {
            source
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("trace{i}"))
        });
        let file = out_dir.join(format!("trace-{label}.csv"));
        let mut body = String::from("frequency,value\n");
        for (f, a) in spectrum.frequencies_hz.iter().zip(&spectrum.asd) {
            let v = match args.qn_ref {
                Some(qn) => a / qn,
                None => *a,
            };
            body.push_str(&io::fmt_float(*f));
            body.push(',');
            body.push_str(&io::fmt_float(v));
            body.push('\n');
        }
        std::fs::write(&file, body)?;
        manifest = manifest.input(source).output(&file);
        legend.push(json!({
            "label": label,
            "source": source.display().to_string(),
            "file": file.file_name().map(|s| s.to_string_lossy().into_owned()),
            "units": if args.qn_ref.is_some() { "relative to quantum noise" } else { "Hz^-1/2" },
        }));
    }
    io::write_json(
        &legend_path,
        &json!({
            "traces": legend,
            "qn_ref": args.qn_ref,
            "manifest": manifest_name(&legend_path),
        }),
    )?;
    manifest.output(&legend_path).write(&legend_path)?;
    println!(
        "plot-data: {} trace(s) -> {}",
        args.traces.len(),
        out_dir.display()
    );
    Ok(())
}
