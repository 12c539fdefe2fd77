//! End-to-end tests of every subcommand: each one runs the real binary,
//! checks the exit code, and compares the emitted JSON/CSV against known
//! values at stated tolerances. Golden numeric values come from closed
//! forms (rotation angles, annulus integrals) — never from a previous
//! run of the code under test.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hameo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be one JSON document")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).expect("report file should exist");
    serde_json::from_str(&text).expect("report should be valid JSON")
}

fn f(v: &serde_json::Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing numeric field {key:?} in {v}"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hameo-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

/// Every stamped artifact carries the 16-hex-digit run fingerprint.
fn assert_stamp(v: &serde_json::Value) {
    let hash = v["config_hash"].as_str().expect("config_hash");
    assert_eq!(hash.len(), 16);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(v["seed"].is_u64());
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

/// Height generator on the sphere: z is conserved and the azimuth
/// advances by exactly -t, so every trajectory row has a closed form.
#[test]
fn flow_csv_matches_exact_rotation() {
    let dir = tmp_dir("flow");
    let out = dir.join("flow.json");
    let res = run(&[
        "flow",
        "--surface",
        "sphere",
        "--ham",
        "sphere_height",
        "--grid",
        "8",
        "--frames",
        "3",
        "--step",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let report = read_json(&out);
    assert_stamp(&report);
    assert_eq!(report["frames"], 3);
    assert_eq!(report["points"], 64);
    assert!(f(&report, "conservation_drift") < 1e-8);
    assert!(f(&report, "exact_flow_deviation") < 1e-6);

    let csv = std::fs::read_to_string(dir.join("flow.csv")).expect("csv sibling");
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# config "));
    assert!(header.ends_with(" seed 7"));
    assert_eq!(lines.next().unwrap(), "t,grid_index,chart,c1,c2");

    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 64, "frames x grid points");

    // Pair each grid point's first and last frame and check the closed
    // form: z fixed, phi decreased by 1 (mod 2π).
    let parse = |s: &str| s.parse::<f64>().unwrap();
    for first in rows.iter().take(64) {
        let idx = first[1];
        let last = rows
            .iter()
            .rev()
            .find(|r| r[1] == idx)
            .expect("final frame row for this grid point");
        assert_eq!(first[2], "cylinder");
        assert_eq!(last[2], "cylinder");
        assert!((parse(last[3]) - parse(first[3])).abs() < 1e-9, "z conserved");
        let dphi = parse(last[4]) - parse(first[4]);
        let wrapped = (dphi + 1.0).rem_euclid(2.0 * std::f64::consts::PI);
        let dist_to_zero = wrapped.min(2.0 * std::f64::consts::PI - wrapped);
        assert!(dist_to_zero < 1e-6, "azimuth should advance by -1, got {dphi}");
    }
}

#[test]
fn flow_without_ham_is_a_usage_error() {
    let res = run(&["flow", "--surface", "sphere"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("ham"));
}

#[test]
fn malformed_config_reports_line_and_column() {
    let dir = tmp_dir("badcfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\n  \"surface\": \"sphere\",\n  \"bogus\": 3\n}\n").unwrap();
    let res = run(&["flow", "--config", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "diagnostic should name the line: {err}");
    assert!(err.contains("bogus"), "diagnostic should name the key: {err}");
}

// ---------------------------------------------------------------------------
// algebra
// ---------------------------------------------------------------------------

#[test]
fn algebra_residuals_are_small_for_a_seeded_pair() {
    let report = stdout_json(&run(&["algebra", "--surface", "disc", "--seed", "3", "--grid", "10"]));
    assert_stamp(&report);
    let rows = report["residuals"].as_array().expect("residual rows");
    let names: Vec<&str> = rows.iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "product_law",
            "inverse_law",
            "time_rescale",
            "reparameterization_flow",
            "reparameterization_norm",
            "dev_additivity"
        ]
    );
    for row in rows {
        assert!(
            f(row, "residual") < 1e-4,
            "residual {} too large: {}",
            row["check"],
            row["residual"]
        );
    }
    assert!(f(&report, "max_residual") < 1e-4);
}

#[test]
fn algebra_rejects_a_lone_second_hamiltonian() {
    let res = run(&["algebra", "--surface", "sphere", "--second", "sphere_height"]);
    assert_eq!(res.status.code(), Some(2));
}

// ---------------------------------------------------------------------------
// hofer
// ---------------------------------------------------------------------------

/// Height generator on the sphere: oscillation is exactly 2 at every
/// time, so leng and both norms are 2; the metric from a path to itself
/// vanishes.
#[test]
fn hofer_height_norms_match_closed_form() {
    let report = stdout_json(&run(&[
        "hofer",
        "--surface",
        "sphere",
        "--ham",
        "sphere_height",
        "--second",
        "sphere_height",
        "--grid",
        "16",
        "--step",
        "0.002",
        "--frames",
        "17",
    ]));
    assert_stamp(&report);
    for key in ["leng", "norm_l1", "norm_sup", "leng_second"] {
        assert!((f(&report, key) - 2.0).abs() < 1e-6, "{key} should be 2");
    }
    assert!(f(&report, "d_c0") < 1e-12);
    assert!(f(&report, "d_ham") < 1e-9);
}

// ---------------------------------------------------------------------------
// displace
// ---------------------------------------------------------------------------

/// Displacing the cap z > 0.8 needs rotation angle > 2·arccos(0.8); the
/// witness family pays ‖H‖ = 2·angle, so the optimum sits just above
/// 4·arccos(0.8) ≈ 2.574.
#[test]
fn displace_cap_brackets_the_rotation_cost() {
    let dir = tmp_dir("displace");
    let out = dir.join("cap.json");
    let res = run(&[
        "displace",
        "--target",
        r#"{"kind":"cap","zmin":0.8}"#,
        "--family",
        "cap-rotations",
        "--budget",
        "400",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out);
    assert_stamp(&report);
    assert_eq!(report["feasible"], true);
    assert!(report["floor"].is_null(), "caps carry no ball floor");
    let value = f(&report, "value");
    let lower = 4.0 * 0.8f64.acos();
    assert!(value >= lower - 1e-9, "value {value} below analytic threshold {lower}");
    assert!(value <= lower + 0.5, "value {value} far above threshold {lower}");
    assert_eq!(report["params"].as_array().unwrap().len(), 1);
    assert!(dir.join("cap.csv").exists(), "csv sibling for the report");
}

#[test]
fn displace_rejects_unknown_family() {
    let res = run(&[
        "displace",
        "--target",
        r#"{"kind":"cap","zmin":0.8}"#,
        "--family",
        "no-such-family",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

// ---------------------------------------------------------------------------
// cal
// ---------------------------------------------------------------------------

/// The closed-form annulus integral and the time-and-area path integral
/// must agree on any profile.
#[test]
fn cal_two_routes_agree() {
    let report = stdout_json(&run(&[
        "cal",
        "--profile",
        r#"{"lo":0.25,"hi":0.9,"amp":1.1}"#,
    ]));
    assert_stamp(&report);
    let rel_gap = f(&report, "rel_gap");
    assert!(rel_gap < 1e-6, "routes disagree: rel gap {rel_gap}");
    assert!((f(&report, "direct") - f(&report, "via_path")).abs() < 1e-6);
}

#[test]
fn cal_requires_exactly_one_input() {
    assert_eq!(run(&["cal"]).status.code(), Some(2));
    let both = run(&[
        "cal",
        "--profile",
        r#"{"lo":0.2,"hi":0.8,"amp":1.0}"#,
        "--ham",
        r#"{"ham":"twist","profile":{"lo":0.2,"hi":0.8,"amp":1.0}}"#,
    ]);
    assert_eq!(both.status.code(), Some(2), "conflicting inputs are a usage error");
}

// ---------------------------------------------------------------------------
// wild
// ---------------------------------------------------------------------------

/// Depth-5 truncation: the invariant equals the depth while the uniform
/// gaps between consecutive truncations halve — divergence of the
/// invariant against uniform convergence of the maps.
#[test]
fn wild_report_shows_divergence_at_depth_five() {
    let dir = tmp_dir("wild");
    let out = dir.join("wild.json");
    let res = run(&["wild", "--K", "5", "--grid", "24", "--report", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out);
    assert_stamp(&report);
    assert!((f(&report, "cal") - 5.0).abs() < 1e-5, "cal should be ~5");

    let levels = report["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 5);
    for level in levels {
        assert!((f(level, "cal") - 1.0).abs() < 1e-6, "calibrated level value");
        if level["k"].as_u64().unwrap() >= 2 {
            assert!(f(level, "conjugation_residual") < 1e-10);
        }
    }

    let truncations = report["truncations"].as_array().unwrap();
    assert_eq!(truncations.len(), 5);
    let gaps: Vec<f64> = truncations
        .iter()
        .map(|t| f(t, "map_gap_to_previous"))
        .collect();
    for (k, pair) in gaps.windows(2).enumerate() {
        assert!(
            pair[1] < 0.7 * pair[0],
            "uniform gaps should shrink geometrically, got {gaps:?} at k={k}"
        );
    }
    for (i, t) in truncations.iter().enumerate() {
        assert!(
            (f(t, "cal") - (i as f64 + 1.0)).abs() < 1e-5,
            "truncated invariant should equal the depth"
        );
    }
}

// ---------------------------------------------------------------------------
// limits
// ---------------------------------------------------------------------------

#[test]
fn limits_geometric_suite_sets_decay_flags() {
    let dir = tmp_dir("limits");
    let out = dir.join("geom.json");
    let res = run(&[
        "limits",
        "--suite",
        "geometric",
        "--prefix",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out);
    assert_stamp(&report);

    // Declared report schema: label, rows of {i, j, ham_gap, flow_gap}, flags.
    assert!(report["label"].is_string());
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6 * 5 / 2, "all index pairs i < j");
    for row in rows {
        assert!(row["i"].is_u64() && row["j"].is_u64());
        assert!(f(row, "ham_gap") >= 0.0);
        assert!(f(row, "flow_gap") >= 0.0);
    }
    let flags: Vec<&str> = report["flags"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for expected in ["ham-gaps-decay", "flow-gaps-decay", "cauchy"] {
        assert!(flags.contains(&expected), "missing flag {expected} in {flags:?}");
    }
    assert!(
        !flags.iter().any(|f| f.contains("violation")),
        "bundled families must never be flagged as violations"
    );

    let csv = std::fs::read_to_string(dir.join("geom.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "i,j,ham_gap,flow_gap");
}

#[test]
fn limits_conservation_study_csv_shows_fourth_order() {
    let dir = tmp_dir("study");
    let out = dir.join("cons.csv");
    let res = run(&[
        "limits",
        "--study",
        "conservation",
        "--surface",
        "sphere",
        "--ham",
        r#"{"ham":"axis_profile","axis":[0.6,0,0.8],"coeffs":[0,1,0.5]}"#,
        "--levels",
        "3",
        "--nominal-step",
        "0.016",
        "--grid",
        "14",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    // A ".csv" out path puts the table there, with the JSON beside it.
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config "));
    assert_eq!(lines[1], "step,residual,observed_order");
    assert_eq!(lines.len(), 2 + 3, "three ladder levels");
    let first: Vec<&str> = lines[2].split(',').collect();
    assert!(first[2].is_empty(), "no observed order at the coarsest step");
    let second: Vec<&str> = lines[3].split(',').collect();
    let order: f64 = second[2].parse().unwrap();
    assert!(
        (3.0..=6.0).contains(&order),
        "expected roughly fourth-order decay, got {order}"
    );

    let report = read_json(&dir.join("cons.json"));
    assert_stamp(&report);
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[test]
fn verify_flow_suite_passes_and_prints_a_table() {
    let res = run(&["verify", "--suite", "flow", "--seed", "7"]);
    assert!(res.status.success());
    let table = String::from_utf8_lossy(&res.stdout);
    assert!(table.contains("suite"), "table header");
    assert!(table.contains("pass"));
    assert!(table.contains("0 failed"));
}

#[test]
fn verify_unknown_suite_is_a_usage_error() {
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

// ---------------------------------------------------------------------------
// cross-cutting contracts
// ---------------------------------------------------------------------------

/// Identical config and seed produce byte-identical payloads, also under
/// a different thread cap.
#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let args = ["algebra", "--surface", "disc", "--seed", "11", "--grid", "10"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let capped = bin()
        .args(args)
        .env("HAMEO_THREADS", "2")
        .output()
        .expect("binary should spawn");
    assert_eq!(first.stdout, capped.stdout);
}

#[test]
fn unwritable_output_path_exits_one() {
    let res = run(&[
        "cal",
        "--profile",
        r#"{"lo":0.2,"hi":0.8,"amp":1.0}"#,
        "--out",
        "/no-such-dir/report.json",
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn invalid_thread_cap_is_a_usage_error() {
    let res = bin()
        .args(["verify", "--suite", "hofer"])
        .env("HAMEO_THREADS", "zero")
        .output()
        .expect("binary should spawn");
    assert_eq!(res.status.code(), Some(2));
}
