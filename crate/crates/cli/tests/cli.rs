use std::path::Path;
use std::process::{Command, Output};

fn chiptrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiptrap")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn detect_fidelity_json() {
    let o = chiptrap(&["detect", "fidelity"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["header"].as_str().unwrap().starts_with("chiptrap "));
    let f = v["fidelity"].as_f64().unwrap();
    assert!((f - 0.990).abs() <= 0.005, "{f}");
}

#[test]
fn loss_totals() {
    let o = chiptrap(&["loss"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().starts_with("# chiptrap "));
    let totals: Vec<(String, f64)> = text
        .lines()
        .filter(|l| l.contains(",total,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[3].parse().unwrap())
        })
        .collect();
    let want = [("422", 35.0), ("461", 31.5), ("674", 31.4), ("1092", 26.4)];
    assert_eq!(totals.len(), want.len());
    for ((c, db), (wc, wdb)) in totals.iter().zip(want) {
        assert_eq!(c, wc);
        assert!((db - wdb).abs() < 1e-9, "{c}: {db}");
    }
}

#[test]
fn malformed_scenario_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "channels": 7"#).unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let o = chiptrap(&["--scenario", bad.to_str().unwrap(), "--out", out.to_str().unwrap(), "loss"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn missing_scenario_file() {
    let o = chiptrap(&["--scenario", "/nonexistent/scenario.json", "loss"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_beam_is_invalid_scenario() {
    let o = chiptrap(&["beam", "cut", "--beam", "9999"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ramsey_needs_seed() {
    let o = chiptrap(&["ramsey", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = chiptrap(&["--out", d.path().to_str().unwrap(), "--seed", "7", "spectrum"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for (name, bytes) in &a {
        let first = String::from_utf8_lossy(bytes).lines().next().unwrap().to_string();
        assert!(first.contains("chiptrap 0.1.0 scenario sha256:"), "{name}: {first}");
    }
}

#[test]
fn trap_freqs_axial() {
    let o = chiptrap(&["trap", "freqs", "--axial-mhz", "1.4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let axial = v["modes"].as_array().unwrap().iter().find(|m| m["mode"] == "y").unwrap();
    assert!((axial["frequency_mhz"].as_f64().unwrap() - 1.4).abs() < 1e-6);
}
