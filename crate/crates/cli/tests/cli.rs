//! End-to-end checks of the command-line surface: exit codes, config
//! diagnostics, file round trips and record-format equivalence.

use std::path::Path;
use std::process::{Command, Output};

fn pclaser(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pclaser"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // 0: success
    let out = pclaser(d, &["threshold", "--config", "passivated"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // 2: usage errors
    assert_eq!(code(&pclaser(d, &["threshold"])), 2);
    assert_eq!(code(&pclaser(d, &["no-such-command"])), 2);
    assert_eq!(
        code(&pclaser(
            d,
            &[
                "lasing-curve",
                "--config",
                "passivated",
                "--min-uw",
                "5",
                "--max-uw",
                "1"
            ]
        )),
        2
    );

    // 3: input/parse errors
    assert_eq!(
        code(&pclaser(d, &["threshold", "--config", "missing.conf"])),
        3
    );
    std::fs::write(d.join("bad.conf"), "[laser]\ntau_r_ps = -5\n").unwrap();
    assert_eq!(code(&pclaser(d, &["threshold", "--config", "bad.conf"])), 3);
    std::fs::write(d.join("trace.csv"), "time_ps,intensity\n0,1\n1,abc\n").unwrap();
    assert_eq!(
        code(&pclaser(
            d,
            &[
                "fit-trace",
                "--config",
                "passivated",
                "--trace",
                "trace.csv"
            ]
        )),
        3
    );

    // 4: numerical failure (the lasing level is never fed)
    std::fs::write(
        d.join("dark.conf"),
        include_str!("../presets/passivated.conf").replace("tau_ef_ps = 6", "tau_ef_ps = inf"),
    )
    .unwrap();
    let out = pclaser(d, &["threshold", "--config", "dark.conf"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_error_messages_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.conf"), "").unwrap();
    let out = pclaser(d, &["threshold", "--config", "empty.conf"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[laser]") && err.contains("tau_r_ps"), "{err}");

    std::fs::write(
        d.join("typo.conf"),
        include_str!("../presets/passivated.conf").replace("f_cav = 33", "f_cavity = 33"),
    )
    .unwrap();
    let out = pclaser(d, &["threshold", "--config", "typo.conf"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("f_cavity") && err.contains("line"), "{err}");
}

#[test]
fn threshold_compare_prints_ratio_near_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = pclaser(
        dir.path(),
        &[
            "threshold",
            "--config",
            "unpassivated",
            "--compare",
            "passivated",
        ],
    );
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let anchor = stdout
        .find("threshold ratio")
        .expect("ratio section printed");
    let ratio_line = stdout[anchor..]
        .lines()
        .find(|l| l.trim_start().starts_with("analytic"))
        .expect("ratio printed");
    let ratio: f64 = ratio_line
        .split_whitespace()
        .last()
        .unwrap()
        .parse()
        .unwrap();
    assert!((ratio - 4.1).abs() < 0.2, "printed analytic ratio {ratio}");
}

#[test]
fn record_formats_encode_identical_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&pclaser(
            d,
            &[
                "threshold",
                "--config",
                "passivated",
                "--format",
                "jsonl",
                "--out",
                "a"
            ]
        )),
        0
    );
    assert_eq!(
        code(&pclaser(
            d,
            &[
                "threshold",
                "--config",
                "passivated",
                "--format",
                "csv",
                "--out",
                "b"
            ]
        )),
        0
    );
    let jsonl: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(d.join("a/threshold.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    let csv = std::fs::read_to_string(d.join("b/threshold.csv")).unwrap();
    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let (name, value) = line.split_once(',').unwrap();
        if let Some(j) = jsonl["outputs"].get(name) {
            if let Some(jv) = j.as_f64() {
                // shortest round-trip decimals in both encodings: equal exactly
                let cv: f64 = value.parse().unwrap();
                assert_eq!(cv, jv, "{name}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 5, "only {checked} numeric outputs compared");
}

#[test]
fn synth_trace_file_round_trips_through_fit_input() {
    // the trace written by synth loads back and fits without complaint
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&pclaser(
            d,
            &["synth", "--config", "passivated", "--seed", "3"]
        )),
        0
    );
    let out = pclaser(
        d,
        &[
            "fit-trace",
            "--config",
            "passivated",
            "--trace",
            "synth.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(d.join("fit-trace.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(rec["outputs"]["converged"], 1.0);
}

#[test]
fn simulate_writes_state_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = pclaser(
        d,
        &[
            "simulate",
            "--config",
            "passivated",
            "--t-end-ps",
            "200",
            "--samples",
            "50",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(csv.starts_with("time_ps,p_cm3,n_g_cm3,n_e_cm3,l_out_uW\n"));
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn lasing_curve_columns_and_grid_options() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = pclaser(
        d,
        &[
            "lasing-curve",
            "--config",
            "passivated",
            "--min-uw",
            "0",
            "--max-uw",
            "100",
            "--points",
            "20",
            "--linear",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    assert!(csv.starts_with("l_in_uW,l_out_uW,n_g_cm3,p_cm3\n"));
    // a grid starting at zero has a dark first point
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("0,0,"), "{first}");

    // log grid from zero is rejected as usage
    let out = pclaser(
        d,
        &[
            "lasing-curve",
            "--config",
            "passivated",
            "--min-uw",
            "0",
            "--max-uw",
            "100",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn repo_preset_files_match_bundled_ones() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    for name in ["passivated.conf", "unpassivated.conf"] {
        let bundled = std::fs::read(manifest.join("presets").join(name)).unwrap();
        let repo = std::fs::read(manifest.join("../../presets").join(name)).unwrap();
        assert_eq!(bundled, repo, "presets/{name} out of sync");
    }
}
