// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakval"))
}

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("spawn weakval")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const SODIUM: &str = r#"{
  "version": 1,
  "system": {"dim": 6, "initial": {"named": "sodium_initial"}, "postselection": {"named": "sodium_anomalous_post"}},
  "observable": {"named": "jy6"},
  "channel": {"kind": "sodium", "gamma": 1.0},
  "sweep": {"start": 0.0, "stop": 10.0, "count": 21}
}"#;

#[test]
fn sodium_trace_matches_reference_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SODIUM);
    let o = run(&["weak-value", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let (header, got) = parse_csv(&dir.path().join("trace.csv"));
    let (ref_header, want) = parse_csv(&manifest().join("tests/golden/sodium_anomalous.csv"));
    assert_eq!(header, ref_header);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        for (a, b) in g.iter().zip(w) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{g:?} vs {w:?}");
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SODIUM);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        let o = run(&["weak-value", "--jobs", jobs, "--format", "json", "--config", cfg.to_str().unwrap()], out);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(a.join("trace.json")).unwrap(), std::fs::read(b.join("trace.json")).unwrap());

    for out in [&a, &b] {
        let o = run(&["scenario", "classify", "--noise", "1e-4", "--seed", "7"], out);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(a.join("classify.csv")).unwrap(), std::fs::read(b.join("classify.csv")).unwrap());
}

#[test]
fn identity_observable_gives_unit_weak_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1,
            "system": {"dim": 2, "initial": {"bloch": [0.3, -0.2, 0.5]}, "postselection": {"bloch": [0.0, 0.8, -0.6]}},
            "observable": {"named": "identity"},
            "channel": {"kind": "amplitude_damping", "gamma": 2.0},
            "sweep": {"start": 0.0, "stop": 4.0, "count": 9}}"#,
    );
    let o = run(&["weak-value", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let (_, rows) = parse_csv(&dir.path().join("trace.csv"));
    for r in rows {
        assert!((r[1] - 1.0).abs() < 1e-12 && r[2].abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn orthogonal_pair_at_zero_time_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1,
            "system": {"dim": 2, "initial": {"named": "excited"}, "postselection": {"named": "ground"}},
            "observable": {"named": "sigma_x"},
            "channel": {"kind": "amplitude_damping", "gamma": 1.0},
            "sweep": {"start": 0.0, "stop": 0.0, "count": 1}}"#,
    );
    let o = run(&["weak-value", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gaps_are_written_as_nan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1,
            "system": {"dim": 2, "initial": {"named": "excited"}, "postselection": {"named": "ground"}},
            "observable": {"named": "sigma_x"},
            "channel": {"kind": "amplitude_damping", "gamma": 1.0},
            "sweep": {"start": 0.0, "stop": 1.0, "count": 3}}"#,
    );
    let o = run(&["weak-value", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.contains("NaN"), "{first}");
    // |e> decays to |g>: sigma_x gives zero weak value once the gap closes.
    let (_, rows) = parse_csv(&dir.path().join("trace.csv"));
    assert!(rows[2][1].abs() < 1e-12 && rows[2][3] > 0.0);
}

#[test]
fn scenario_classify_nonmarkov() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "classify", "--channel", "nonmarkov_jc", "--format", "json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("classify.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["classification"]["verdict"], "strongly-non-Markovian");
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l.starts_with("PASS ")));
}

#[test]
fn sodium_scenarios_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["sodium-anomalous", "sodium-constant"] {
        let o = run(&["scenario", name], dir.path());
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(dir.path().join(format!("{name}.csv")).exists());
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["scenario", "no-such-scenario"], dir.path())), 2);
    assert_eq!(code(&run(&["scenario", "estimate-gamma", "--epsilon", "0.5"], dir.path())), 2);

    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1,
            "system": {"dim": 2, "initial": {"named": "excited"}, "postselection": {"named": "ground"}},
            "observable": {"named": "sigma_x"},
            "chanel": {"kind": "amplitude_damping", "gamma": 1.0}}"#,
    );
    let o = run(&["weak-value", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("chanel"));

    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run(&["weak-value", "--config", missing.to_str().unwrap()], dir.path())), 2);
}

fn invert_config(q: f64, p: f64, g: f64) -> String {
    format!(
        r#"{{"version": 1,
            "meter": {{"omega_f": 1.0, "state": {{"kind": "vacuum"}}, "g": {g}, "t": 0.1}},
            "measured": {{"q": {q:e}, "p": {p:e}, "tau": 0.5}}}}"#
    )
}

fn invert_output(o: &Output) -> (f64, f64) {
    let text = String::from_utf8_lossy(&o.stdout);
    let mut it = text.lines().next().unwrap().split_whitespace().map(|s| s.parse::<f64>().unwrap());
    (it.next().unwrap(), it.next().unwrap())
}

#[test]
fn invert_round_trips_shifts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"version": 1,
            "system": {"dim": 2, "initial": {"epsilon_initial": 0.1}, "postselection": {"epsilon_post": 0.1}},
            "observable": {"named": "sigma_x"},
            "channel": {"kind": "amplitude_damping", "gamma": 1.0},
            "sweep": {"start": 0.5, "stop": 0.5, "count": 1},
            "meter": {"omega_f": 1.0, "state": {"kind": "vacuum"}, "g": 0.01, "t": 0.1}}"#,
    );
    let o = run(&["shifts", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let (_, rows) = parse_csv(&dir.path().join("shifts.csv"));
    let (re, im, q, p) = (rows[0][1], rows[0][2], rows[0][3], rows[0][4]);

    let cfg = write_config(dir.path(), "i.json", &invert_config(q, p, 0.01));
    let o = run(&["invert", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (r, i) = invert_output(&o);
    assert!((r - re).abs() < 1e-10 * (1.0 + re.abs()), "{r} vs {re}");
    assert!((i - im).abs() < 1e-10 * (1.0 + im.abs()), "{i} vs {im}");
}

#[test]
fn invert_zero_shifts_and_singular() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.json", &invert_config(0.0, 0.0, 0.01));
    let o = run(&["invert", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let (r, i) = invert_output(&o);
    assert!(r.abs() < 1e-12 && i.abs() < 1e-12);

    let cfg = write_config(dir.path(), "s.json", &invert_config(1e-3, 1e-3, 0.0));
    assert_eq!(code(&run(&["invert", "--config", cfg.to_str().unwrap()], dir.path())), 5);
}

#[test]
fn shifts_with_simulation_agree_to_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = manifest().join("../../configs/rabi_shifts.json");
    let o = run(&["shifts", "--simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = parse_csv(&dir.path().join("shifts.csv"));
    assert_eq!(header.last().unwrap(), "p_simulated");
    let gt: f64 = 0.01 * 0.1;
    for r in &rows {
        let (q, p, qs, ps) = (r[3], r[4], r[5], r[6]);
        let scale = gt * (1.0 + r[1].hypot(r[2]));
        assert!((q - qs).abs() < 10.0 * gt * scale && (p - ps).abs() < 10.0 * gt * scale, "{r:?}");
    }
}
