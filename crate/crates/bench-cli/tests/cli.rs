use std::path::Path;
use std::process::Command;

use qnetsense_bench::{run, Kind, ResultTable, DIVERGENT};

const N_SWEEP: &str = r#"
name = "n-sweep"
components = 2
strategies = ["NLE", "RS", "LE_bell"]
T = "1.5pi"

[field]
B = 1.0
phi = "pi/4"

[sweep]
axis = "N"
values = [1, 2, 3, 4]
"#;

const T_SWEEP: &str = r#"
name = "t-sweep"
components = 3
T = 1.0

[field]
B = 1.0
theta = "pi/3"

[sweep]
axis = "T"
values = [1.0, "pi", 2.0, "2pi"]
"#;

fn table(kind: Kind, text: &str) -> ResultTable {
    run(kind, text, None).unwrap().output.table
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qnetsense"))
}

fn run_bin(args: &[&str], config: &str, dir: &Path) -> std::process::Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    bin()
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .env_remove("QNETSENSE_OUT")
        .output()
        .unwrap()
}

#[test]
fn csv_round_trip_is_exact() {
    for t in [table(Kind::PrecisionSweep, N_SWEEP), table(Kind::PrecisionSweep, T_SWEEP)] {
        let text = t.to_csv_string();
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string(), text);
    }
}

#[test]
fn n_sweep_reproduces_reference_bounds() {
    let t = table(Kind::PrecisionSweep, N_SWEEP);
    assert_eq!(t.columns[0], "N");
    let reference = [("bound_NLE", 0.073763), ("bound_RS", 0.261263), ("bound_LE_bell", 0.136255)];
    for row in 0..4 {
        let n = t.f64_at(row, "N").unwrap();
        for (col, v) in reference {
            let got = t.f64_at(row, col).unwrap();
            assert!((got * n * n - v).abs() < 1e-5, "{col} at N={n}: {got}");
        }
        let gain = t.f64_at(row, "gain_db_NLE_vs_LE_bell").unwrap();
        assert!((gain - 2.665).abs() < 1e-3, "{gain}");
    }
}

#[test]
fn full_turns_are_marked_divergent() {
    let t = table(Kind::PrecisionSweep, T_SWEEP);
    for (row, divergent) in [(0, false), (1, true), (2, false), (3, true)] {
        for col in ["bound_NLE", "bound_RS", "bound_LE_bell", "bound_LE_opt", "gain_db_NLE_vs_RS"] {
            assert_eq!(t.cell(row, col) == Some(DIVERGENT), divergent, "row {row}, {col}");
        }
    }
}

#[test]
fn qfim_flags_degenerate_points() {
    let t = table(
        Kind::Qfim,
        r#"
strategy = "RS"
points = [{ B = 1.0, theta = "pi/3", phi = 0.4, T = 1.2 }, { B = 1.0, theta = 0.0, T = 1.2 }]
"#,
    );
    assert_eq!(t.cell(0, "identifiable"), Some("yes"));
    assert_eq!(t.cell(1, "identifiable"), Some("no"));
    assert_eq!(t.cell(1, "non_identifiable"), Some("phi"));
    assert!(t.f64_at(0, "max_abs_diff").unwrap() < 1e-6);

    let nle = run(Kind::Qfim, "strategy = \"NLE\"\nrandom_points = 4\nseed = 3\n", None).unwrap().output;
    assert!(nle.summary["max_abs_diff"].as_f64().unwrap() < 1e-6);
    assert!(nle.summary["max_cross_block"].as_f64().unwrap() < 1e-8);
}

fn landscape(strategy: &str, comps: usize, truth: &str, axes: (&str, &str), span: f64, n: u32) -> String {
    format!(
        r#"
strategy = "{strategy}"
components = {comps}
truth = {truth}
T = "pi/4"
N = {n}

[[axes]]
param = "{}"
start = {}
stop = {}
points = 21

[[axes]]
param = "{}"
start = {}
stop = {}
points = 21
"#,
        axes.0,
        -span,
        span,
        axes.1,
        -span,
        span
    )
}

#[test]
fn landscape_peaks_at_truth_with_heisenberg_curvature() {
    let curv = |n: u32| {
        let text = format!(
            r#"
strategy = "RS"
truth = [1.0, 1.0, 0.5]
T = "pi/4"
N = {n}
[[axes]]
param = "theta"
start = 0.8
stop = 1.2
points = 21
[[axes]]
param = "phi"
start = 0.3
stop = 0.7
points = 21
"#
        );
        let out = run(Kind::Landscape, &text, None).unwrap().output;
        assert_eq!(out.summary["argmax_is_truth_cell"], true, "N={n}");
        out.summary["peak_curvature"][0].as_f64().unwrap()
    };
    let ratio = curv(8) / curv(4);
    assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
}

#[test]
fn gradient_landscape_is_symmetric_under_sign_flip() {
    let text = landscape("NLE", 2, "[0.0, 0.0, 1.4, 1.4]", ("gradBx", "gradBy"), 0.3, 1);
    let t = table(Kind::Landscape, &text);
    let g = |i: usize| t.f64_at(i, "raw").unwrap();
    let n = t.rows.len();
    for i in 0..n {
        assert!((g(i) - g(n - 1 - i)).abs() < 1e-9 * g(i).abs().max(1.0), "row {i}");
    }
}

#[test]
fn landscape_accepts_time_axis() {
    let text = r#"
strategy = "RS"
truth = [1.0, "pi/4", "pi/4"]
control = [0.0, 0.0, 0.0]
T = 1.0
[[axes]]
param = "B"
values = [0.5, 1.0, 1.5]
[[axes]]
param = "T"
values = [0.5, 1.0]
"#;
    let t = table(Kind::Landscape, text);
    assert_eq!(t.columns[..4], ["B", "T", "raw", "normalized"]);
    assert_eq!(t.rows.len(), 6);
    // uncontrolled RS at B = 1, T = 1: P_00 = cos²(BT)
    let row = t.rows.iter().position(|r| r[0] == "1.0" && r[1] == "1.0").unwrap();
    assert!((t.f64_at(row, "P_00").unwrap() - 1f64.cos().powi(2)).abs() < 1e-12);
}

#[test]
fn runs_are_reproducible_and_seeded() {
    let text = r#"
name = "tiny"
axis = "gate_error"
levels = [0.0, 0.05]
T = "1.5pi"
shots = 200
trials = 8
seed = 9
"#;
    let a = run(Kind::NoiseSweep, text, None).unwrap().output;
    let b = run(Kind::NoiseSweep, text, None).unwrap().output;
    assert_eq!(a.table.to_csv_string(), b.table.to_csv_string());
    assert_eq!(a.summary, b.summary);
    let c = run(Kind::NoiseSweep, text, Some(10)).unwrap().output;
    assert_eq!(c.table.provenance.seed, 10);
    assert_eq!(c.table.provenance.config_sha256, a.table.provenance.config_sha256);
    assert_ne!(c.table.rows, a.table.rows);
}

#[test]
fn config_hash_ignores_formatting() {
    let a = table(Kind::PrecisionSweep, N_SWEEP);
    let reformatted = format!("# comment\n{}", N_SWEEP.replace("B = 1.0", "B   =   1"));
    let b = table(Kind::PrecisionSweep, &reformatted);
    assert_eq!(a.provenance.config_sha256, b.provenance.config_sha256);
    assert_eq!(a.provenance.config_sha256.len(), 64);
}

#[test]
fn adaptive_rounds_are_tabulated() {
    let text = r#"
starts = [[0.6, 1.9, -1.0]]
seed = 8
[truth]
B = 1.0
theta = "pi/4"
phi = "pi/4"
"#;
    let out = run(Kind::Adaptive, text, None).unwrap().output;
    let t = &out.table;
    let last = t.rows.len() - 1;
    assert_eq!(t.cell(last, "stop"), Some("converged"));
    assert_eq!(t.f64_at(last, "round").unwrap() as usize, t.rows.len());
    assert!(t.f64_at(last, "update_norm").unwrap() < 1e-4);
    for (col, v) in ["estimate_B", "estimate_theta", "estimate_phi"].iter().zip([1.0, 0.785, 0.785]) {
        assert!((t.f64_at(last, col).unwrap() - v).abs() < 0.2, "{col}");
    }
    assert_eq!(out.summary["converged"], 1);
}

#[test]
fn binary_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(&["precision-sweep"], N_SWEEP, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty(), "--quiet leaves stderr empty");
    let csv = std::fs::read_to_string(dir.path().join("out/n-sweep.csv")).unwrap();
    let t = ResultTable::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(t, table(Kind::PrecisionSweep, N_SWEEP));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/n-sweep.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["config_sha256"], t.provenance.config_sha256.as_str());
    assert_eq!(json["rows"], 4);
}

#[test]
fn output_dir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, N_SWEEP).unwrap();
    let status = bin()
        .args(["precision-sweep", "--quiet", "--jobs", "2", "--config"])
        .arg(&cfg)
        .env("QNETSENSE_OUT", dir.path().join("env-out"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("env-out/n-sweep.csv").exists());
}

#[test]
fn bad_configs_exit_with_code_two_and_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (N_SWEEP.replace("[field]", "[field]\nbogus = 1"), "field.bogus"),
        (N_SWEEP.replace("axis = \"N\"", "axis = \"Q\""), "sweep.axis"),
        (N_SWEEP.replace("B = 1.0", "B = \"one\""), "field.B"),
        (N_SWEEP.replace("B = 1.0", "B = -1.0"), "field.B"),
        (N_SWEEP.replace("values = [1, 2, 3, 4]", "values = [1, 2.5]"), "sweep.values[1]"),
        (N_SWEEP.replace("T = \"1.5pi\"\n", ""), "T"),
        (format!("{}\n[monte_carlo]\n", N_SWEEP.replace("components = 2", "components = 3")), "monte_carlo"),
    ];
    for (text, path) in cases {
        let out = run_bin(&["precision-sweep"], &text, dir.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{err}");
        assert!(err.contains(&format!("`{path}`")), "expected {path} in: {err}");
    }
    let out = run_bin(&["landscape"], "strategy = \"LE_opt\"\ncomponents = 3\n", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["qfim", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists(), "nothing is written on error");
}
