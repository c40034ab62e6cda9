use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn roughfil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughfil")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const SMALL_ENERGY: &str = r#"
[curve]
kind = "circle"
n = 64

[kernel]
gamma = 1.0
mu = 1.0
"#;

#[test]
fn exponent_outside_the_range_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[curve]\nkind = \"circle\"\nn = 32\nnu = 0.2\n");
    let out = roughfil(&["energy", "-c", &cfg, "-o", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("violates the constraint nu in (1/3, 1)"), "{err}");
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[curve]\nkind = \"circle\"\nnn = 32\n");
    assert_eq!(roughfil(&["energy", "-c", &cfg]).status.code(), Some(2));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(roughfil(&["energy", "-c", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn energy_pipeline_reports_three_agreeing_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.toml", SMALL_ENERGY);
    let dir = tmp.path().join("out");
    let out = roughfil(&["energy", "-c", &cfg, "-o", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    assert_eq!(s["all_pass"], Value::Bool(true));
    let v = &s["values"];
    let hs: Vec<f64> = ["h_rough", "h_double", "h_fourier"].iter().map(|k| v[k].as_f64().unwrap()).collect();
    assert!(v["agreement"].as_f64().unwrap() <= 1e-3);
    assert!(hs.iter().all(|h| (h - hs[0]).abs() <= 1e-3 * hs[0]));
    let log = fs::read_to_string(dir.join("run_log.jsonl")).unwrap();
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["record"], "energy");
}

#[test]
fn identical_inputs_give_identical_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.toml",
        "[curve]\nkind = \"brownian_bridge\"\nn = 64\nnu = 0.4\nseed = 3\n\n[checks]\nfourier = false\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(roughfil(&["energy", "-c", &cfg, "-o", a.to_str().unwrap()]).status.success());
    assert!(roughfil(&["energy", "-c", &cfg, "-o", b.to_str().unwrap(), "--threads", "1"]).status.success());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    let c = tmp.path().join("c");
    assert!(roughfil(&["energy", "-c", &cfg, "-o", c.to_str().unwrap(), "--seed", "4"]).status.success());
    assert_ne!(summary(&a)["values"], summary(&c)["values"]);
}

#[test]
fn zero_circulation_evolution_has_no_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "z.toml",
        "[curve]\nkind = \"trefoil\"\nn = 32\nscale = 0.5\n\n[kernel]\ngamma = 0.0\n\n[run]\nt_final = 0.1\ndt = 0.01\ndiagnostics_every = 5\n",
    );
    let dir = tmp.path().join("out");
    let out = roughfil(&["evolve", "-c", &cfg, "-o", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(&dir)["values"]["max_relative_drift"].as_f64(), Some(0.0));
}

#[test]
fn evolution_writes_log_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ev.toml",
        "[curve]\nkind = \"circle\"\nn = 32\n\n[run]\nt_final = 0.05\ndt = 0.005\ndiagnostics_every = 2\nsnapshot_every = 4\nremainder_pairs = 4\n\n[checks]\nenabled = [\"envelopes\", \"remainder_consistency\"]\n",
    );
    let dir = tmp.path().join("out");
    let out = roughfil(&["evolve", "-c", &cfg, "-o", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(dir.join("run_log.jsonl")).unwrap();
    let records: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r["record"] == "diagnostic" && r["envelopes"]["sup_gamma"] == Value::Bool(true)));
    let mut snaps: Vec<String> = fs::read_dir(dir.join("snapshots")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    snaps.sort();
    assert_eq!(snaps, ["step_000000.txt", "step_000004.txt", "step_000008.txt"]);

    // a snapshot is itself a valid curve source
    let snap = dir.join("snapshots").join("step_000008.txt");
    let cfg2 = write_config(
        tmp.path(),
        "from_file.toml",
        &format!("[curve]\nkind = \"file\"\npath = {:?}\nnu = 0.9\n\n[checks]\nenabled = [\"chen\"]\nfourier = false\n", snap.to_str().unwrap()),
    );
    let out = roughfil(&["energy", "-c", &cfg2, "-o", tmp.path().join("e").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failing_check_gives_exit_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tight.toml",
        "[curve]\nkind = \"circle\"\nn = 32\n\n[run]\nt_final = 0.05\ndt = 0.01\ndiagnostics_every = 1\n\n[checks]\nenabled = [\"drift\"]\ndrift_tolerance = 1e-15\n",
    );
    let dir = tmp.path().join("out");
    let out = roughfil(&["evolve", "-c", &cfg, "-o", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("drift"));
    assert_eq!(summary(&dir)["all_pass"], Value::Bool(false));
}

#[test]
fn sweep_runs_every_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[curve]\nkind = \"circle\"\nn = 32\n\n[checks]\nenabled = [\"hypothesis\", \"chen\"]\nfourier = false\n\n[sweep]\npipeline = \"energy\"\nparameter = \"kernel.mu\"\nvalues = [0.5, 1.0, 2.0]\n",
    );
    let dir = tmp.path().join("out");
    let out = roughfil(&["sweep", "-c", &cfg, "-o", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = summary(&dir)["values"]["runs"].as_array().unwrap().clone();
    assert_eq!(runs.len(), 3);
    let h: Vec<f64> = runs.iter().map(|r| r["values"]["h_rough"].as_f64().unwrap()).collect();
    assert!(h[0] > h[1] && h[1] > h[2], "{h:?}");
    for k in 0..3 {
        assert!(dir.join(format!("run_{k:03}")).join("summary.json").exists());
    }
}

#[test]
fn validate_passes_and_catches_an_injected_area_error() {
    let out = roughfil(&["validate"]);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(out.status.success(), "{table}");
    assert_eq!(table.lines().filter(|l| l.contains("PASS")).count(), 9, "{table}");

    let out = roughfil(&["validate", "--inject-area-perturbation"]);
    assert_eq!(out.status.code(), Some(3));
    let table = String::from_utf8_lossy(&out.stdout);
    let chen = table.lines().find(|l| l.starts_with("chen_relation")).unwrap();
    assert!(chen.contains("FAIL"), "{table}");
}
