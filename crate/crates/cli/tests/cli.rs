use std::path::Path;
use std::process::{Command, Output};

fn qinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn lists_presets() {
    let out = qinsim(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().any(|l| l == "meo-810-snspd"));
}

#[test]
fn config_error_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"preset": "leo-810-si", "gates": {"beta_min": 95}}"#);
    let out = qinsim(&["validate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gates.beta_min"));
}

#[test]
fn runtime_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "late.json",
        r#"{"preset": "leo-1550-snspd", "orbit": {"epoch": "2021-08-01T00:00:00Z"}, "time": {"duration_days": 1}}"#,
    );
    let out = qinsim(&["run", &cfg, "--out", &dir.path().join("o").display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2021-07-01T00:00:00.000Z"));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.json",
        r#"{"preset": "leo-810-si", "quantum": {"mu": 0.04}, "time": {"duration_days": 5}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = qinsim(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["samples.csv", "daily.csv", "summary.json", "summary.txt", "config.resolved.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let daily = std::fs::read_to_string(out_dir.join("daily.csv")).unwrap();
    assert_eq!(daily.lines().count(), 6);
    let resolved = std::fs::read_to_string(out_dir.join("config.resolved.json")).unwrap();
    assert!(resolved.contains("\"mu\": 0.04"));

    let again = qinsim(&["validate", out_dir.join("config.resolved.json").to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap().trim(), resolved.trim());
}

#[test]
fn worker_count_does_not_change_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"preset": "sso-1550-snspd", "time": {"duration_days": 10}}"#);
    let mut bytes = Vec::new();
    for w in ["1", "3"] {
        let od = dir.path().join(format!("w{w}"));
        let out = qinsim(&["run", &cfg, "--workers", w, "--out", od.to_str().unwrap()]);
        assert!(out.status.success());
        bytes.push((
            std::fs::read(od.join("samples.csv")).unwrap(),
            std::fs::read(od.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn compare_builds_one_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.json", r#"{"preset": "leo-1550-snspd", "time": {"duration_days": 3}}"#);
    let b = write_config(dir.path(), "b.json", r#"{"preset": "meo-1550-snspd", "time": {"duration_days": 3}}"#);
    let od = dir.path().join("cmp");
    let out = qinsim(&["run", &a, &b, "--compare", "--out", od.to_str().unwrap()]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(od.join("comparison.txt")).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.contains("leo-1550-snspd") && header.contains("meo-1550-snspd"));
    assert!(table.lines().any(|l| l.starts_with("Avg dual visibility (min/day)")));
}

#[test]
fn exported_ephemeris_reimports_and_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_config(dir.path(), "base.json", r#"{"preset": "leo-1550-snspd", "time": {"duration_days": 2}}"#);
    let eph = dir.path().join("track.csv");
    let od = dir.path().join("a");
    let out = qinsim(&["run", &base, "--out", od.to_str().unwrap(), "--ephemeris-out", eph.to_str().unwrap()]);
    assert!(out.status.success());

    let imported = dir.path().join("track-eci.csv");
    let out = qinsim(&["import-ephemeris", eph.to_str().unwrap(), "--out", imported.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ECI"));
    assert_eq!(std::fs::read(&eph).unwrap(), std::fs::read(&imported).unwrap());

    let cfg = write_config(
        dir.path(),
        "eph.json",
        r#"{"preset": "leo-1550-snspd", "orbit": {"ephemeris": "track.csv"}, "time": {"duration_days": 2}}"#,
    );
    let od2 = dir.path().join("b");
    let out = qinsim(&["run", &cfg, "--out", od2.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let days = |d: &Path| std::fs::read_to_string(d.join("daily.csv")).unwrap();
    let (a, b) = (days(&od), days(&od2));
    let comm = |t: &str| -> Vec<f64> { t.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect() };
    let (ca, cb) = (comm(&a), comm(&b));
    for (x, y) in ca.iter().zip(&cb) {
        assert!((x - y).abs() <= 20.0, "{x} vs {y}");
    }
}

#[test]
fn bad_ephemeris_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let eph = dir.path().join("bad.csv");
    std::fs::write(&eph, "epoch,x_km,y_km,z_km\n2021-07-01T00:00:00Z,1,2,3\n").unwrap();
    let out = qinsim(&["import-ephemeris", eph.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame"));
}

#[test]
fn unknown_config_or_preset() {
    let out = qinsim(&["run", "geo-1550-snspd"]);
    assert_eq!(out.status.code(), Some(2));
}
