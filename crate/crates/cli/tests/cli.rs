//! End-to-end runs of the `apdet` binary: exit codes, CSV shape, and the
//! numbers the tables must reproduce.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn apdet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apdet"))
        .current_dir(dir)
        .env_remove("APDET_SIZE_CAP")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).expect("config written");
    name.to_string()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// CSV body as (header, records), comment lines skipped.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .expect("csv opens");
    let header = reader
        .headers()
        .expect("header row")
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.expect("record").iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} in {header:?}"));
    rows.iter().map(|r| r[idx].clone()).collect()
}

fn floats(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    column(header, rows, name)
        .iter()
        .map(|s| s.parse().unwrap_or_else(|_| panic!("float in {name}: {s:?}")))
        .collect()
}

const GOLDEN: &str = "0.6180339887498949";

#[test]
fn trace_residuals_decay_geometrically() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "trace.json",
        &format!(
            r#"{{
                "kind": "trace",
                "group": {{"generators": [{GOLDEN}]}},
                "sequence": [{{"alpha": [1], "coeff": [0.5, 0.0]}}],
                "fractal": {{
                    "lower": {{"kind": "constant", "k0": 0, "len": 16}},
                    "upper": {{"kind": "cf", "skip": 4, "len": 16}}
                }}
            }}"#
        ),
    );
    let out = apdet(dir.path(), &["trace", "--config", &config, "--out", "t.csv"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("t.csv"));
    assert_eq!(rows.len(), 16);
    let res = floats(&header, &rows, "residual_abs");
    for pair in res.windows(2) {
        assert!(
            pair[1] < 0.8 * pair[0],
            "residuals must shrink by the golden ratio per rung: {pair:?}"
        );
    }
    assert!(res[15] < 1e-3 * res[0]);
}

#[test]
fn singular_block_symbol_rows_are_exact_zeros() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "diag.json",
        r#"{
            "kind": "szego-block",
            "symbol": {
                "block_size": 2,
                "blocks": [
                    {"offset": 1, "entries": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]},
                    {"offset": -1, "entries": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]}
                ]
            },
            "windows": [[0, 4], [1, 7], [0, 8], [2, 10]]
        }"#,
    );
    let out = apdet(
        dir.path(),
        &["szego-block", "--config", &config, "--out", "d.csv"],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("d.csv"));
    assert_eq!(rows.len(), 4);
    assert!(column(&header, &rows, "ratio_re").iter().all(|v| v == "0"));
    assert!(column(&header, &rows, "ratio_im").iter().all(|v| v == "0"));
    assert!(column(&header, &rows, "flag").iter().all(|v| v == "singular"));
}

#[test]
fn weight_audit_matches_the_golden_bound() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "audit.json",
        &format!(
            r#"{{
                "kind": "audit-weight",
                "group": {{"generators": [{GOLDEN}]}},
                "q_cap": 100000
            }}"#
        ),
    );
    let out = apdet(
        dir.path(),
        &["audit-weight", "--config", &config, "--out", "a.csv"],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("a.csv"));
    assert_eq!(rows.len(), 1);
    let c_est = floats(&header, &rows, "C_est")[0];
    assert!(
        (0.44..=0.55).contains(&c_est),
        "infimum of q * dist(q xi, Z) near 1/sqrt(5), got {c_est}"
    );
}

#[test]
fn validate_warns_on_unsuitable_exponents_without_blocking() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "warn.json",
        &format!(
            r#"{{
                "kind": "audit-weight",
                "group": {{"generators": [{GOLDEN}]}},
                "band_exponents": [1.0, 1.0]
            }}"#
        ),
    );
    let out = apdet(dir.path(), &["validate", "--config", &config]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("warning"), "stdout: {text}");
    assert!(text.contains("sum to 2"), "stdout: {text}");
}

#[test]
fn validate_rejects_shift_inside_operator_norm() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        &format!(
            r#"{{
                "kind": "mathieu",
                "mathieu": {{"beta": 1.0, "xi": {GOLDEN}, "lambda": [2.0, 0.0]}},
                "windows": [[0, 8]]
            }}"#
        ),
    );
    let out = apdet(dir.path(), &["validate", "--config", &config]);
    assert_eq!(exit_code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("shift modulus"), "stdout: {text}");

    // The run subcommand refuses the same config before any numerics.
    let out = apdet(dir.path(), &["mathieu", "--config", &config, "--out", "n.csv"]);
    assert_eq!(exit_code(&out), 1);
    assert!(!dir.path().join("n.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "ratio.json",
        &format!(
            r#"{{
                "kind": "ratio",
                "group": {{"generators": [{GOLDEN}]}},
                "factors": [[
                    {{"offset": 1, "alpha": [1], "coeff": [0.15, 0.05]}},
                    {{"offset": -1, "alpha": [0], "coeff": [0.2, 0.0]}}
                ]],
                "windows": [[0, 13], [0, 21], [0, 34]]
            }}"#
        ),
    );
    let first = apdet(dir.path(), &["ratio", "--config", &config, "--out", "r1.csv"]);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_of(&first));
    let second = apdet(
        dir.path(),
        &["ratio", "--config", &config, "--out", "r2.csv", "--threads", "2"],
    );
    assert_eq!(exit_code(&second), 0, "stderr: {}", stderr_of(&second));

    let a = std::fs::read(dir.path().join("r1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("r2.csv")).unwrap();
    assert_eq!(a, b, "same config must byte-reproduce the CSV");
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "typo.json",
        r#"{"kind": "trace", "grop": {"generators": [0.5]}}"#,
    );
    let out = apdet(dir.path(), &["trace", "--config", &config]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("unknown field"));
}

#[test]
fn size_cap_env_blocks_oversized_gaps_upfront() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "uniform.json",
        r#"{
            "kind": "uniform",
            "group": {"generators": []},
            "factors": [[{"offset": 1, "coeff": [0.5, 0.0]}, {"offset": -1, "coeff": [0.5, 0.0]}]],
            "gaps": [16]
        }"#,
    );
    let out = Command::new(env!("CARGO_BIN_EXE_apdet"))
        .current_dir(dir.path())
        .env("APDET_SIZE_CAP", "8")
        .args(["uniform", "--config", &config])
        .output()
        .expect("binary runs");
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("size cap"), "stderr: {}", stderr_of(&out));

    // Without the override the same config runs to completion.
    let out = apdet(dir.path(), &["uniform", "--config", &config, "--out", "u.csv"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
}

#[test]
fn theta_ladder_matches_strong_szego() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "theta.json",
        r#"{
            "kind": "theta",
            "group": {"generators": []},
            "factors": [[{"offset": 1, "coeff": [0.5, 0.0]}, {"offset": -1, "coeff": [0.5, 0.0]}]],
            "tolerances": {"ladder": 1e-8},
            "characters": [{"shift": 0}]
        }"#,
    );
    let out = apdet(dir.path(), &["theta", "--config", &config, "--out", "th.csv"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("th.csv"));
    assert_eq!(rows.len(), 2);
    assert!(column(&header, &rows, "converged").iter().all(|v| v == "true"));
    // Both theta constants of exp((t + 1/t)/2) equal e^{1/8}.
    let target = (1.0f64 / 8.0).exp();
    for v in floats(&header, &rows, "value_re") {
        assert!((v - target).abs() < 1e-6, "theta {v} vs e^(1/8) {target}");
    }
}

#[test]
fn mathieu_ratios_track_theta_products() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "mathieu.json",
        &format!(
            r#"{{
                "kind": "mathieu",
                "mathieu": {{"beta": 1.0, "xi": {GOLDEN}, "delta": 0.0, "lambda": [5.0, 0.0]}},
                "tolerances": {{"ladder": 1e-5, "ladder_cap": 512}},
                "windows": [[0, 55], [0, 89]]
            }}"#
        ),
    );
    let out = apdet(dir.path(), &["mathieu", "--config", &config, "--out", "m.csv"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("m.csv"));
    assert_eq!(rows.len(), 2);
    assert!(column(&header, &rows, "flag").iter().all(|v| v.is_empty()));
    for r in floats(&header, &rows, "residual_abs") {
        assert!(r < 1e-3, "window ratio vs theta product residual {r}");
    }
}

#[test]
fn exhausted_ladders_flag_rows_and_exit_two() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "exhaust.json",
        &format!(
            r#"{{
                "kind": "theta",
                "group": {{"generators": [{GOLDEN}]}},
                "factors": [[
                    {{"offset": 1, "alpha": [1], "coeff": [0.3, 0.0]}},
                    {{"offset": -1, "alpha": [0], "coeff": [0.3, 0.0]}}
                ]],
                "tolerances": {{"ladder": 1e-14, "ladder_start": 4, "ladder_cap": 8}},
                "characters": [{{"shift": 0}}]
            }}"#
        ),
    );
    let out = apdet(dir.path(), &["theta", "--config", &config, "--out", "e.csv"]);
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));

    // The table is still written, with the unconverged rows marked.
    let (header, rows) = read_table(&dir.path().join("e.csv"));
    assert_eq!(rows.len(), 2);
    assert!(column(&header, &rows, "converged").iter().all(|v| v == "false"));
}

#[test]
fn subcommand_and_config_kind_must_agree() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "uniform.json",
        r#"{
            "kind": "uniform",
            "group": {"generators": []},
            "factors": [[{"offset": 1, "coeff": [0.5, 0.0]}]],
            "gaps": [4]
        }"#,
    );
    let out = apdet(dir.path(), &["ratio", "--config", &config]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("does not match"));
}

#[test]
fn exponential_block_form_carries_theta_products() {
    let dir = TempDir::new().unwrap();
    // B(t) is strictly upper triangular, so exp(B) = I + B exactly and the
    // supplied symbol reproduces the factor product with no truncation.
    let config = write_config(
        dir.path(),
        "exp.json",
        r#"{
            "kind": "szego-block",
            "symbol": {
                "block_size": 2,
                "blocks": [
                    {"offset": 0, "entries": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]},
                    {"offset": 1, "entries": [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]}
                ]
            },
            "factors": [[
                {"offset": 1, "rho": 0, "coeff": [0.5, 0.0]},
                {"offset": 1, "rho": 1, "coeff": [0.5, 0.0]}
            ]],
            "windows": [[0, 10], [1, 11], [0, 21]]
        }"#,
    );
    let out = apdet(
        dir.path(),
        &["szego-block", "--config", &config, "--out", "x.csv"],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let (header, rows) = read_table(&dir.path().join("x.csv"));
    assert_eq!(rows.len(), 3);
    for r in floats(&header, &rows, "residual_abs") {
        assert!(r < 1e-10, "triangular symbol has unit ratios, residual {r}");
    }
    for v in floats(&header, &rows, "theta_prod_re") {
        assert!((v - 1.0).abs() < 1e-10);
    }
}
