//! Black-box tests of the `vbsim` command-line binary: argument handling,
//! strict configuration validation, exit codes, output formats and
//! reproducibility of the emitted files.

// Expected values keep the full digit strings of the extended-precision
// references they were computed from.
#![allow(clippy::excessive_precision)]

use std::path::Path;
use std::process::{Command, Output};

fn vbsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vbsim"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header line")
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|line| line.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn cell(rows: &[Vec<String>], row: usize, col: usize) -> f64 {
    rows[row][col].parse().expect("numeric cell")
}

#[test]
fn lattice_output_is_deterministic_and_well_formed() {
    let args = ["lattice", "--set", "preset=fig1-n-ring1"];
    let first = stdout_of(&vbsim(&args));
    let second = stdout_of(&vbsim(&args));
    assert_eq!(first, second, "repeated runs must emit identical bytes");

    let (header, rows) = parse_csv(&first);
    assert_eq!(header, ["index", "species", "x_m", "y_m", "ring"]);
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        assert_eq!(row[1], "N14");
        assert_eq!(row[4], "1");
        let r = cell(&rows, k, 2).hypot(cell(&rows, k, 3));
        assert!((r - 1.5e-10).abs() < 1e-20, "ring-1 radius, got {r}");
    }
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let out = vbsim(&[
        "lattice",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "tmax_s=1e-6",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("tmax_s"), "stderr must name the key: {err}");
}

#[test]
fn missing_required_keys_are_reported() {
    let out = vbsim(&["exact", "--set", "preset=fig1-n-ring1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("t_max_s"), "stderr must name the key: {err}");
}

#[test]
fn conflicting_bath_selections_are_rejected() {
    let out = vbsim(&["lattice", "--set", "preset=fig2-30", "--set", "rings=3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(
        err.contains("preset") && err.contains("rings"),
        "stderr must name the clash: {err}"
    );
}

#[test]
fn malformed_values_mention_key_and_value() {
    let out = vbsim(&[
        "exact",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=fast",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(
        err.contains("t_max_s") && err.contains("fast"),
        "stderr must name key and value: {err}"
    );
}

#[test]
fn usage_errors_use_the_standard_exit_code() {
    let out = vbsim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = |name: &str| dir.path().join(name);
    let as_str = |p: &Path| p.to_str().unwrap().to_owned();

    let m1 = path("first.cfg");
    let o1 = path("first.csv");
    let out = vbsim(&[
        "exact",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=1e-7",
        "--set",
        "n_points=5",
        "--manifest",
        &as_str(&m1),
        "--output",
        &as_str(&o1),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let m2 = path("second.cfg");
    let o2 = path("second.csv");
    let out = vbsim(&[
        "exact",
        "--config",
        &as_str(&m1),
        "--manifest",
        &as_str(&m2),
        "--output",
        &as_str(&o2),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));

    let read = |p: &Path| std::fs::read(p).expect("readable file");
    assert_eq!(
        read(&m1),
        read(&m2),
        "re-running from a manifest must reproduce it byte for byte"
    );
    assert_eq!(read(&o1), read(&o2), "outputs must match byte for byte");

    let manifest = String::from_utf8(read(&m1)).unwrap();
    for key in ["preset=", "b_field_t=", "temperature_k=", "method="] {
        assert!(
            manifest.contains(key),
            "manifest must pin {key}: {manifest}"
        );
    }
}

#[test]
fn sampled_trace_reports_standard_errors() {
    let args = [
        "hpa",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=1e-7",
        "--set",
        "n_points=5",
        "--set",
        "n_samples=4",
    ];
    let (header, rows) = parse_csv(&stdout_of(&vbsim(&args)));
    assert_eq!(header, ["time_s", "sx", "sx_stderr"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(cell(&rows, 0, 0), 0.0);
    assert_eq!(cell(&rows, 0, 1), 1.0);
    assert_eq!(cell(&rows, 0, 2), 0.0);
    for k in 0..5 {
        assert!(cell(&rows, k, 1).abs() <= 1.0);
        assert!(cell(&rows, k, 2) >= 0.0);
    }
}

#[test]
fn standard_error_column_can_be_disabled() {
    let args = [
        "hpa",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=1e-7",
        "--set",
        "n_points=5",
        "--set",
        "n_samples=4",
        "--set",
        "stderr=false",
    ];
    let (header, rows) = parse_csv(&stdout_of(&vbsim(&args)));
    assert_eq!(header, ["time_s", "sx"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn reference_trace_has_no_error_column() {
    let args = [
        "exact",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=1e-7",
        "--set",
        "n_points=5",
    ];
    let (header, rows) = parse_csv(&stdout_of(&vbsim(&args)));
    assert_eq!(header, ["time_s", "sx"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(cell(&rows, 0, 1), 1.0);
}

#[test]
fn worker_count_never_changes_results() {
    let base = [
        "hpa",
        "--set",
        "preset=fig1-n-ring1",
        "--set",
        "t_max_s=1e-7",
        "--set",
        "n_points=5",
        "--set",
        "n_samples=8",
    ];
    let mut one = base.to_vec();
    one.extend(["--set", "workers=1"]);
    let mut two = base.to_vec();
    two.extend(["--set", "workers=2"]);
    let serial = stdout_of(&vbsim(&one));
    let parallel = stdout_of(&vbsim(&two));
    assert_eq!(serial, parallel);

    let via_env = Command::new(env!("CARGO_BIN_EXE_vbsim"))
        .args(base)
        .env("VBSIM_WORKERS", "3")
        .output()
        .expect("binary launches");
    assert_eq!(serial, stdout_of(&via_env));
}

#[test]
fn coupling_tables_include_pair_couplings() {
    let dir = tempfile::tempdir().expect("tempdir");
    let pairs_path = dir.path().join("pairs.csv");
    let out = vbsim(&[
        "couplings",
        "--set",
        "preset=fig1-n-ring1",
        "--pairs-output",
        pairs_path.to_str().unwrap(),
    ]);
    let (header, rows) = parse_csv(&stdout_of(&out));
    assert_eq!(
        header,
        [
            "index",
            "species",
            "x_m",
            "y_m",
            "ring",
            "omega_n_rad_s",
            "g_e_rad_s"
        ]
    );
    assert_eq!(rows.len(), 3);
    // All three nearest nitrogens carry the same defect coupling.
    let g0 = cell(&rows, 0, 6);
    for k in 1..3 {
        assert!((cell(&rows, k, 6) / g0 - 1.0).abs() < 1e-11);
    }

    let pairs = std::fs::read_to_string(&pairs_path).expect("pairs file");
    let (pairs_header, pairs_rows) = parse_csv(&pairs);
    assert_eq!(pairs_header, ["i", "j", "g_nn_rad_s"]);
    assert_eq!(pairs_rows.len(), 3, "three sites give three pairs");
    // The nearest nitrogens form an equilateral triangle, so every pair
    // coupling is identical.
    let p0 = cell(&pairs_rows, 0, 2);
    for k in 1..3 {
        assert!((cell(&pairs_rows, k, 2) / p0 - 1.0).abs() < 1e-11);
    }
}

#[test]
fn phonon_report_lists_all_rates() {
    let out = stdout_of(&vbsim(&["phonon", "--set", "lambda00_hz=1e8"]));
    let report: serde_json::Value = serde_json::from_str(&out).expect("json report");
    assert_eq!(report["temperature_k"].as_f64(), Some(300.0));
    let beta = report["beta_omega_d"].as_f64().expect("beta");
    assert!((beta - 6.76930223757088).abs() < 1e-9);
    let gamma = report["gamma_per_s"].as_f64().expect("rate");
    let low = report["gamma_low_t_per_s"].as_f64().expect("low rate");
    let high = report["gamma_high_t_per_s"].as_f64().expect("high rate");
    assert!(gamma > 0.0 && low > 0.0 && high > 0.0);
    // Both closed forms bound the spectral integral from above: the
    // low-temperature one replaces the integral by its asymptote and the
    // high-temperature one overestimates the integrand everywhere.
    assert!(gamma < low && gamma < high);
}

#[test]
fn combine_reproduces_the_zero_coupling_value() {
    let out = stdout_of(&vbsim(&["combine", "--set", "t2_bath_s=30e-6"]));
    let report: serde_json::Value = serde_json::from_str(&out).expect("json report");
    let t2 = report["t2_combined_s"].as_f64().expect("combined time");
    let expected = 1.02254653834758201 * 30e-6;
    assert!(
        (t2 / expected - 1.0).abs() < 1e-5,
        "zero-coupling combined time {t2} vs {expected}"
    );
}

#[test]
fn fit_recovers_a_synthetic_stretched_exponential() {
    let dir = tempfile::tempdir().expect("tempdir");
    let trace_path = dir.path().join("trace.csv");
    let tau = 2.0e-5;
    let mut csv = String::from("time_s,sx\n");
    for k in 0..200 {
        let t = 6.0e-5 * k as f64 / 199.0;
        csv.push_str(&format!("{:e},{:e}\n", t, (-(t / tau).powi(6)).exp()));
    }
    std::fs::write(&trace_path, csv).expect("write trace");

    let out = stdout_of(&vbsim(&["fit", "--input", trace_path.to_str().unwrap()]));
    let report: serde_json::Value = serde_json::from_str(&out).expect("json report");
    let exponent = report["exponent"].as_f64().expect("exponent");
    let time_constant = report["time_constant_s"].as_f64().expect("time constant");
    assert!((exponent - 6.0).abs() < 0.05, "exponent {exponent}");
    assert!(
        (time_constant / tau - 1.0).abs() < 0.01,
        "time constant {time_constant}"
    );
    let t2 = report["t2_s"].as_f64().expect("envelope crossing");
    assert!(
        (t2 / (tau * 2.0_f64.ln().powf(1.0 / 6.0)) - 1.0).abs() < 0.02,
        "envelope crossing {t2}"
    );
}
