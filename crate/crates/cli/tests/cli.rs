use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qwalk(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwalk"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QWALK_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/config.schema.json");
    json_file(&path)
}

// Rows of a CSV written by the tool, header comments dropped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn evolve_writes_one_distribution_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwalk(&["evolve", "--steps", "5", "--out", "ev"], dir.path());
    ok(&out);
    let ev = dir.path().join("ev");
    for t in 0..=5 {
        let rows = csv_rows(&ev.join(format!("dist_t{t}.csv")));
        let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12, "t={t} total {total}");
    }
    assert!(!ev.join("dist_t6.csv").exists());
    assert_eq!(csv_rows(&ev.join("center_of_mass.csv")).len(), 6);
    assert!(fs::read_to_string(ev.join("run.log")).unwrap().contains("status=ok"));
}

#[test]
fn zero_steps_echoes_the_input() {
    let dir = tempfile::tempdir().unwrap();
    ok(&qwalk(&["evolve", "--steps", "0", "--input", "R", "--out", "e0"], dir.path()));
    let rows = csv_rows(&dir.path().join("e0/dist_t0.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1], "0");
    assert!((rows[0][2].parse::<f64>().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn chern_prints_both_bands() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwalk(&["chern", "--delta", "pi/2", "--grid", "24", "--out", "c"], dir.path());
    ok(&out);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["chern_minus"], 1);
    assert_eq!(printed["chern_plus"], -1);

    let out = qwalk(&["chern", "--delta", "pi/8", "--grid", "24", "--out", "c0"], dir.path());
    ok(&out);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["chern_minus"], 0);
    assert_eq!(printed["chern_plus"], 0);
}

#[test]
fn near_critical_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwalk(&["chern", "--delta", "pi/4", "--out", "c"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema_version": 1, "chern": {"delta": 1.0, "grdi": 24}}"#).unwrap();
    let out = qwalk(&["--config", "bad.json", "chern"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(&cfg, r#"{"schema_version": 2}"#).unwrap();
    let out = qwalk(&["--config", "bad.json", "chern"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qwalk(&["deviations", "--steps", "15", "--out", "d"], dir.path()).status.code(), Some(2));
    assert_eq!(qwalk(&["edge", "--q-count", "3", "--out", "e"], dir.path()).status.code(), Some(2));
    assert_eq!(qwalk(&["evolve", "--delta", "half", "--out", "e"], dir.path()).status.code(), Some(2));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwalk(&["--dry-run", "evolve", "--out", "never"], dir.path());
    ok(&out);
    let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["command"], "evolve");
    assert_eq!(plan["params"]["steps"], 5);
    assert!(!dir.path().join("never").exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"schema_version": 1, "threads": 1, "chern": {"delta": "pi/8", "grid": 30}}"#,
    )
    .unwrap();
    let out = qwalk(&["--config", "cfg.json", "--dry-run", "chern", "--delta", "pi/2"], dir.path());
    ok(&out);
    let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["threads"], 1);
    assert_eq!(plan["params"]["grid"], 30);
    let delta = plan["params"]["delta"].as_f64().unwrap();
    assert!((delta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);

    let out = qwalk(&["--config", "cfg.json", "--dry-run", "bands"], dir.path());
    ok(&out);
    let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["params"]["grid"], 101);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, threads) in [("a", "1"), ("b", "2")] {
        ok(&qwalk(
            &["--threads", threads, "monte-carlo", "--samples", "8", "--steps", "3", "--out", name],
            dir.path(),
        ));
        ok(&qwalk(&["--threads", threads, "evolve", "--steps", "4", "--out", &format!("{name}/ev")], dir.path()));
    }
    let files = |sub: &str| -> BTreeSet<String> {
        fs::read_dir(dir.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".csv") || n.ends_with(".json"))
            .collect()
    };
    for sub in ["", "/ev"] {
        let (a, b) = (format!("a{sub}"), format!("b{sub}"));
        assert_eq!(files(&a), files(&b));
        assert!(!files(&a).is_empty());
        for f in files(&a) {
            let x = fs::read(dir.path().join(&a).join(&f)).unwrap();
            let y = fs::read(dir.path().join(&b).join(&f)).unwrap();
            assert!(x == y, "{f} differs between runs");
        }
    }
}

#[test]
fn transport_summary_has_fit_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = qwalk(
        &["transport", "--grid", "3", "--steps", "3", "--combine-inverse", "--out", "t"],
        dir.path(),
    );
    ok(&out);
    let summary = json_file(&dir.path().join("t/summary.json"));
    let data = &summary["data"];
    for key in ["delta", "F_x", "nu_fit", "nu_err"] {
        assert!(!data[key].is_null(), "missing {key} in {data}");
    }
    assert_eq!(summary["meta"]["command"], "transport");
    // 3x3 packets, t = 0..=3, direct and inverse.
    assert_eq!(csv_rows(&dir.path().join("t/packets.csv")).len(), 9 * 4 * 2);
}

#[test]
fn schema_sections_match_resolved_parameters() {
    let schema = schema();
    let sections = &schema["properties"];
    let dir = tempfile::tempdir().unwrap();
    for (verb, key) in [
        ("evolve", "evolve"),
        ("bands", "bands"),
        ("chern", "chern"),
        ("phase-diagram", "phase_diagram"),
        ("transport", "transport"),
        ("velocity-map", "velocity_map"),
        ("edge", "edge"),
        ("optics", "optics"),
        ("deviations", "deviations"),
        ("monte-carlo", "monte_carlo"),
    ] {
        let out = qwalk(&["--dry-run", verb], dir.path());
        ok(&out);
        let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
        let resolved: BTreeSet<&str> = plan["params"].as_object().unwrap().keys().map(String::as_str).collect();
        let declared: BTreeSet<&str> = sections[key]["properties"]
            .as_object()
            .unwrap_or_else(|| panic!("schema lacks section {key}"))
            .keys()
            .map(String::as_str)
            .collect();
        assert_eq!(resolved, declared, "section {key}");
    }
}

#[test]
fn shipped_example_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/example.json");
    let out = qwalk(&["--config", example.to_str().unwrap(), "--dry-run", "transport"], dir.path());
    ok(&out);
    let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["params"]["grid"], 11);
    assert_eq!(plan["params"]["band"], "lower");
}
