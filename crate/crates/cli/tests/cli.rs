//! Behavior of the `backscatter` binary: reproducibility, config/flag
//! precedence, error reporting.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_backscatter"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn backscatter");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn seeded_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "simulate".into(),
            "--kind".into(),
            "shelf".into(),
            "--ratio".into(),
            "1.7e-11".into(),
            "--duration".into(),
            "4".into(),
            "--seed".into(),
            "42".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_ok(bin().args(args(&a)));
    run_ok(bin().args(args(&b)));
    assert_eq!(read(&a), read(&b));

    let c = dir.path().join("c.csv");
    run_ok(bin().args([
        "simulate",
        "--kind",
        "shelf",
        "--ratio",
        "1.7e-11",
        "--duration",
        "4",
        "--seed",
        "43",
        "--out",
        c.to_str().unwrap(),
    ]));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn spectrum_and_fit_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let spectrum = dir.path().join("spectrum.csv");
    let fit = dir.path().join("fit.json");
    run_ok(bin().args([
        "simulate",
        "--kind",
        "shelf",
        "--ratio",
        "1.7e-11",
        "--duration",
        "120",
        "--seed",
        "5",
        "--out",
        series.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "spectrum",
        "--in",
        series.to_str().unwrap(),
        "--segment",
        "2048",
        "--out",
        spectrum.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "fit-shelf",
        "--in",
        spectrum.to_str().unwrap(),
        "--phi-m",
        "173",
        "--f-m",
        "1",
        "--band",
        "10:150",
        "--out",
        fit.to_str().unwrap(),
    ]));
    let record: serde_json::Value = serde_json::from_slice(&read(&fit)).expect("fit.json parses");
    let ratio = record["ratio"].as_f64().unwrap();
    assert!(
        (ratio / 1.7e-11 - 1.0).abs() < 0.15,
        "CLI round trip recovered {ratio}"
    );
    assert_eq!(record["upper_limit"], serde_json::Value::Bool(false));
    // Sidecars reference the manifest that produced them.
    let sidecar: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("spectrum.json"))).unwrap();
    assert_eq!(sidecar["manifest"], "spectrum.manifest.json");
    assert!(dir.path().join("spectrum.manifest.json").exists());
}

#[test]
fn fit_shelf_model_overlay_reproduces_shelf_structure() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let spectrum = dir.path().join("spectrum.csv");
    let fit = dir.path().join("fit.json");
    let model = dir.path().join("model.csv");
    run_ok(bin().args([
        "simulate",
        "--kind",
        "shelf",
        "--ratio",
        "1.7e-11",
        "--duration",
        "60",
        "--seed",
        "8",
        "--out",
        series.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "spectrum",
        "--in",
        series.to_str().unwrap(),
        "--out",
        spectrum.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "fit-shelf",
        "--in",
        spectrum.to_str().unwrap(),
        "--phi-m",
        "173",
        "--f-m",
        "1",
        "--band",
        "10:150",
        "--model-out",
        model.to_str().unwrap(),
        "--out",
        fit.to_str().unwrap(),
    ]));
    // The overlay pair reproduces the shelf structure: measured and model
    // agree on the plateau and both cut off near phi_m * f_m = 173 Hz.
    let parse = |path: &Path| -> Vec<(f64, f64)> {
        String::from_utf8(read(path))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let (f, v) = l.split_once(',').unwrap();
                (f.parse().unwrap(), v.parse().unwrap())
            })
            .collect()
    };
    let measured = parse(&spectrum);
    let modeled = parse(&model);
    let band_power = |rows: &[(f64, f64)], lo: f64, hi: f64| -> f64 {
        rows.iter()
            .filter(|(f, _)| *f >= lo && *f <= hi)
            .map(|(_, a)| a * a)
            .sum()
    };
    let ratio_plateau = band_power(&measured, 40.0, 150.0) / band_power(&modeled, 40.0, 150.0);
    assert!(
        (10.0 * ratio_plateau.log10()).abs() < 1.0,
        "plateau power off by {ratio_plateau}"
    );
    let model_plateau = band_power(&modeled, 40.0, 150.0);
    let model_beyond = band_power(&modeled, 195.0, 400.0);
    assert!(
        model_beyond < model_plateau * 1e-4,
        "model keeps power beyond the shelf edge"
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "drive": {
                "kind": "sinusoidal_phase",
                "frequency_hz": 1.0,
                "modulation_depth_rad": 50.0,
                "seed": 9
            },
            "duration_s": 2.0,
            "sample_rate_hz": 1000.0
        }"#,
    )
    .unwrap();
    let out = dir.path().join("series.csv");
    run_ok(bin().args([
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--phi-m",
        "80",
        "--out",
        out.to_str().unwrap(),
    ]));
    let sidecar: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("series.json"))).unwrap();
    assert_eq!(sidecar["config"]["drive"]["modulation_depth_rad"], 80.0);
    assert_eq!(sidecar["config"]["drive"]["seed"], 9);
    assert_eq!(sidecar["config"]["duration_s"], 2.0);
}

#[test]
fn zero_depth_with_fixed_phase_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("const.csv");
    run_ok(bin().args([
        "simulate",
        "--kind",
        "shelf",
        "--phi-m",
        "0",
        "--static-phase",
        "0",
        "--shot-noise",
        "off",
        "--duration",
        "2",
        "--sample-rate",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]));
    let content = String::from_utf8(read(&out)).unwrap();
    let values: Vec<&str> = content
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(values.len() > 100);
    assert!(values.iter().all(|v| *v == values[0]));
}

#[test]
fn usage_and_input_errors_are_reported() {
    // Unknown flag: clap usage error.
    let out = bin()
        .args(["simulate", "--does-not-exist", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // Malformed CSV names the file and line.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,value\n0.0,1.0\nnope,1.0\n").unwrap();
    let out = bin()
        .args([
            "spectrum",
            "--in",
            bad.to_str().unwrap(),
            "--out",
            dir.path().join("s.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.csv"), "stderr: {msg}");

    // Undersampled shelf drive fails with the aliasing diagnostic.
    let out = bin()
        .args([
            "simulate",
            "--kind",
            "shelf",
            "--sample-rate",
            "100",
            "--duration",
            "2",
            "--out",
            dir.path().join("x.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("aliasing"), "stderr: {msg}");

    // Band parse error names the expected shape.
    let out = bin()
        .args([
            "fit-shelf",
            "--in",
            bad.to_str().unwrap(),
            "--phi-m",
            "173",
            "--f-m",
            "1",
            "--band",
            "150",
            "--out",
            dir.path().join("f.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("LO:HI"));
}

#[test]
fn plot_data_with_no_traces_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "plot-data",
            "--out-dir",
            dir.path().join("plots").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn out_dir_env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .env("BACKSCATTER_OUT_DIR", dir.path())
            .args([
                "simulate",
                "--kind",
                "shelf",
                "--duration",
                "2",
                "--sample-rate",
                "1000",
                "--out",
                "env-series.csv",
            ])
            .current_dir(dir.path().join("..")),
    );
    assert!(dir.path().join("env-series.csv").exists());
    assert!(dir.path().join("env-series.manifest.json").exists());
}

#[test]
fn budget_cli_reports_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("budget.json");
    run_ok(bin().args([
        "budget",
        "--ps",
        "260e-15",
        "--eta",
        "0.38",
        "--rho",
        "0.11",
        "--psp",
        "0.7e-6",
        "--rin",
        "0.868",
        "--x",
        "0.6",
        "--waist",
        "34e-6",
        "--whatif-rin",
        "0.80",
        "--out",
        out.to_str().unwrap(),
    ]));
    let record: serde_json::Value = serde_json::from_slice(&read(&out)).unwrap();
    let db = record["r_opo_db"].as_f64().unwrap();
    assert!((db - (-50.51)).abs() < 0.02, "r_opo_db {db}");
    let bsdf = record["bsdf_per_sr"].as_f64().unwrap();
    assert!((bsdf - 7.947e-5).abs() / 7.947e-5 < 1e-3, "bsdf {bsdf}");
    let reduction = record["mitigation"]["r_opo_reduction_factor"]
        .as_f64()
        .unwrap();
    assert!((reduction - 2.2957).abs() < 1e-3, "reduction {reduction}");
}
