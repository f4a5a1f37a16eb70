use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_smoothmech"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn first_price_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("certify", &configs().join("certify_first_price.json"), dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("certify.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("margin"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "first_price");
    assert_eq!(row[2], "0.632120558829");
    assert!(row[6].parse::<f64>().unwrap() >= -1e-7);
}

#[test]
fn too_strong_a_claim_fails_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("certify", &configs().join("certify_first_price_too_strong.json"), dir.path(), &[]);
    assert_eq!(code, 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("certify.json")).unwrap()).unwrap();
    let cert = &json["result"]["certificates"][0]["certificate"];
    assert_eq!(cert["passes"], false);
    assert!(cert["margin"].as_f64().unwrap() < 0.0);
    assert!(cert["worst_profile"]["bids"].is_array());
}

#[test]
fn malformed_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mechanism": {"kind": "first_price", "n": 2, "grid": {"max": 1, "points": 3, "step": 1}}}"#).unwrap();
    let (code, err) = run("certify", &bad, dir.path(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("schema violation"), "{err}");

    std::fs::write(&bad, r#"{"mechanism": {"kind": "first_price", "n": 2}, "valuations": {"source": "catalog", "seed": 1, "count": 2}, "colour": 1}"#).unwrap();
    let (code, err) = run("certify", &bad, dir.path(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("colour"), "{err}");

    // generators need a seed
    std::fs::write(&bad, r#"{"mechanism": {"kind": "first_price", "n": 2}, "valuations": {"source": "generator", "generator": "additive", "count": 2}}"#).unwrap();
    assert_eq!(run("certify", &bad, dir.path(), &[]).0, 1);

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run("certify", &bad, dir.path(), &[]).0, 1);
    assert_eq!(run("certify", &dir.path().join("missing.json"), dir.path(), &[]).0, 1);
}

#[test]
fn caps_and_refusals_are_reported_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.json");
    std::fs::write(
        &big,
        r#"{"mechanism": {"kind": "first_price", "n": 3, "grid": {"max": 1, "points": 101}}, "valuations": {"source": "catalog", "seed": 1, "count": 1}}"#,
    )
    .unwrap();
    let (code, err) = run("ce", &big, dir.path(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("cap"), "{err}");
    let (code, err) = run("budget", &configs().join("budget_sequential_refused.json"), dir.path(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("refused"), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("compose_simultaneous.json");
    assert_eq!(run("compose", &cfg, a.path(), &["--seed", "8"]).0, 0);
    assert_eq!(run("compose", &cfg, b.path(), &["--seed", "8", "--threads", "1"]).0, 0);
    for f in ["compose.csv", "compose.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn hybrid_sweep_follows_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("hybrid-sweep", &configs().join("hybrid_sweep.json"), dir.path(), &[]).0, 0);
    let csv = std::fs::read_to_string(dir.path().join("hybrid-sweep.csv")).unwrap();
    let bounds: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(bounds.len(), 3);
    assert!((bounds[0] - 0.5).abs() < 1e-12);
    assert!((bounds[1] - 0.45286).abs() < 1e-4);
    assert!((bounds[2] - 0.63212).abs() < 1e-5);
}

/// Every shipped config runs with the expected status.
#[test]
fn shipped_configs() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    let mut names: Vec<PathBuf> = std::fs::read_dir(configs()).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let sub = match name.split('_').next().unwrap() {
            "catalog" => "certify",
            "hybrid" => "hybrid-sweep",
            s => s,
        };
        let expected = match name.as_str() {
            "certify_first_price_too_strong" => 2,
            "budget_sequential_refused" => 1,
            _ => 0,
        };
        let (code, err) = run(sub, &path, &dir.path().join(&name), &[]);
        assert_eq!(code, expected, "{name}: {err}");
        seen += 1;
    }
    assert!(seen >= 30);
}
