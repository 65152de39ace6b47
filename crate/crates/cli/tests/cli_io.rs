//! Golden-file and exit-code tests for the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_anisoline")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn simulate_matches_golden_files_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden("simulate_config.json");
    let out = run_in(dir.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let spectrum = std::fs::read(dir.path().join("golden_spectrum.csv")).unwrap();
    assert_eq!(
        spectrum,
        std::fs::read(golden("golden_spectrum.csv")).unwrap(),
        "spectrum CSV drifted from the golden format"
    );
    let summary = std::fs::read(dir.path().join("golden_summary.json")).unwrap();
    assert_eq!(
        summary,
        std::fs::read(golden("golden_summary.json")).unwrap(),
        "summary JSON drifted from the golden format"
    );
}

#[test]
fn fit_report_matches_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = golden("golden_spectrum.csv");
    let report = dir.path().join("report.json");
    let out = run_in(
        dir.path(),
        &[
            "fit",
            spectrum.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ],
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(&report).unwrap(),
        std::fs::read(golden("golden_fit_report.json")).unwrap(),
        "fit report drifted from the golden format"
    );
}

#[test]
fn fit_writes_residuals_and_reports_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = golden("golden_spectrum.csv");
    let residuals = dir.path().join("residuals.csv");
    let out = run_in(
        dir.path(),
        &[
            "fit",
            spectrum.to_str().unwrap(),
            "--residuals",
            residuals.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout).expect("stdout is JSON");
    assert_eq!(report["converged"], serde_json::Value::Bool(true));
    assert!(report["area_ratio"].as_f64().unwrap() > 0.0);
    // residual file parses as a spectrum and is small near the peaks
    let res = std::fs::read_to_string(&residuals).unwrap();
    assert!(res.starts_with("# axis=cm-1\n"));
}

#[test]
fn fit_three_halves_override_inverts_weight_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = golden("golden_spectrum.csv");
    let upper = run_in(dir.path(), &["fit", spectrum.to_str().unwrap()]);
    let lower = run_in(
        dir.path(),
        &["fit", spectrum.to_str().unwrap(), "--three-halves", "lower"],
    );
    assert_eq!(code(&upper), 0);
    assert_eq!(code(&lower), 0);
    let up: serde_json::Value =
        serde_json::from_str(&String::from_utf8(upper.stdout).unwrap()).unwrap();
    let lo: serde_json::Value =
        serde_json::from_str(&String::from_utf8(lower.stdout).unwrap()).unwrap();
    let r_up = up["weight_ratio_i3_over_i1"].as_f64().unwrap();
    let r_lo = lo["weight_ratio_i3_over_i1"].as_f64().unwrap();
    assert!(
        (r_up * r_lo - 1.0).abs() < 1e-12,
        "assignments must be reciprocal"
    );
    assert_eq!(lo["three_halves_component"], "lower");
    // the area ratio itself is assignment-independent
    assert_eq!(up["area_ratio"], lo["area_ratio"]);
}

#[test]
fn fit_on_nm_axis_reports_cm1_splitting() {
    // a two-component spectrum on the wavelength axis; centers at
    // 840 nm and 855 nm -> splitting |1e7/840 - 1e7/855| = 208.9 cm-1
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nm.csv");
    let mut text = String::from("# axis=nm\n");
    let (c1, c2, s) = (840.0, 855.0, 3.0);
    for i in 0..200 {
        let x = 820.0 + 0.25 * i as f64;
        let y = (-(x - c1) * (x - c1) / (2.0 * s * s)).exp()
            + 0.5 * (-(x - c2) * (x - c2) / (2.0 * s * s)).exp();
        text.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(&path, text).unwrap();

    let out = run_in(dir.path(), &["fit", path.to_str().unwrap(), "--axis", "nm"]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let expected = (1.0e7 / 840.0 - 1.0e7 / 855.0f64).abs();
    let got = report["splitting_cm1"].as_f64().unwrap();
    assert!(
        (got - expected).abs() < 0.5,
        "splitting {got} vs {expected}"
    );
    assert_eq!(report["axis"], "nm");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 2: missing spectrum file
    let out = run_in(dir.path(), &["fit", "no_such_file.csv"]);
    assert_eq!(code(&out), 2);

    // 2: malformed spectrum (no header)
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0,2.0\n").unwrap();
    let out = run_in(dir.path(), &["fit", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    // 2: shuffled x
    let shuffled = dir.path().join("shuffled.csv");
    std::fs::write(&shuffled, "# axis=cm-1\n1,0\n3,0\n2,0\n").unwrap();
    let out = run_in(dir.path(), &["fit", shuffled.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 4"),
        "monotonicity error names the offending line"
    );

    // 2: missing config
    let out = run_in(dir.path(), &["simulate", "-c", "nope.json"]);
    assert_eq!(code(&out), 2);

    // 1: schema violation (unknown key)
    let cfg = dir.path().join("bad_config.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(golden("simulate_config.json")).unwrap())
            .unwrap();
    doc["surprise"] = serde_json::json!(1);
    std::fs::write(&cfg, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run_in(dir.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);

    // 1: invalid values (zero samples)
    let cfg2 = dir.path().join("zero_samples.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(golden("simulate_config.json")).unwrap())
            .unwrap();
    doc["ensemble"]["n_samples"] = serde_json::json!(0);
    std::fs::write(&cfg2, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run_in(dir.path(), &["simulate", "-c", cfg2.to_str().unwrap()]);
    assert_eq!(code(&out), 1);

    // 1: unknown unit is a usage error
    let out = run_in(dir.path(), &["convert-units", "770", "kelvin", "nm"]);
    assert_eq!(code(&out), 1);

    // 0: --help
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn convert_units_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["convert-units", "770", "nm", "cm-1"]);
    assert_eq!(code(&out), 0);
    let val: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((val - 12987.012987).abs() < 1e-5);

    let out = run_in(
        dir.path(),
        &["convert-units", "11494.2528736", "cm-1", "nm"],
    );
    let val: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((val - 870.0).abs() < 1e-6);

    // identity conversion
    let out = run_in(dir.path(), &["convert-units", "852.3", "nm", "nm"]);
    let val: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((val - 852.3).abs() < 1e-12);

    // non-positive input is a validation failure
    let out = run_in(dir.path(), &["convert-units", "-5", "nm", "cm-1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn table1_prints_fractions_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["table1"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    for frag in ["4/9", "1/36", "5/36", "z-analyzer", "depolarized"] {
        assert!(stdout.contains(frag), "table output missing `{frag}`");
    }
}

#[test]
fn contrast_scan_runs_from_config_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.json");
    std::fs::write(
        &cfg,
        r#"{"n_samples": 3000, "seed": 5, "static_b": 200.0, "sigmas": [0.0, 100.0]}"#,
    )
    .unwrap();
    let out_a = run_in(dir.path(), &["contrast-scan", "-c", cfg.to_str().unwrap()]);
    assert_eq!(
        code(&out_a),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out_a.stderr)
    );
    let out_b = run_in(dir.path(), &["contrast-scan", "-c", cfg.to_str().unwrap()]);
    assert_eq!(
        out_a.stdout, out_b.stdout,
        "same seed must give identical CSV"
    );

    let text = String::from_utf8(out_a.stdout).unwrap();
    assert!(text.contains("sigma,contrast"));
    // first data row is the static case: contrast 0.9
    let row: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("0.0"))
        .expect("sigma=0 row present")
        .split(',')
        .collect();
    let contrast: f64 = row[1].parse().unwrap();
    assert!((contrast - 0.9).abs() < 0.02, "static contrast {contrast}");
    assert!(text.contains("# monotone_non_increasing="));
}
