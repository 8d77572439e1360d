use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn imub(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_imub")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn torus_doc(extra: Value) -> Value {
    let mut doc = json!({
        "matrix": {"kind": "ssrw_z", "radius": 1, "topology": "torus"},
        "initial": [
            {"site": -1, "type1": 1.0, "type2": 0.0},
            {"site": 0, "type1": 0.0, "type2": 2.0},
            {"site": 1, "type1": 0.5, "type2": 0.0}
        ],
        "epsilons": [0.1],
        "horizon": 1.0,
        "test_functions": [[{"site": 0, "type1": 0.0, "type2": 1.0}]],
        "replicas": 2000,
        "seed": 3
    });
    for (k, v) in extra.as_object().unwrap() {
        doc[k] = v.clone();
    }
    doc
}

fn write_doc(dir: &Path, doc: &Value) -> String {
    let path = dir.join("doc.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn boundary_start_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = imub(&["--out", out, "sample-quadrant", "--u", "0", "--v", "3", "--n", "5"]);
    assert!(o.status.success());
    let text = read(dir.path().join("samples.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows, vec!["vertical,3"; 5]);
}

#[test]
fn sample_count_and_symmetric_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(imub(&["--seed", "9", "--out", out, "sample-quadrant", "--u", "1", "--v", "1", "--n", "1000000"]).status.success());
    let text = read(dir.path().join("samples.csv"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1_000_000);
    let vertical = rows.iter().filter(|r| r.starts_with("vertical")).count() as f64 / 1e6;
    assert!((vertical - 0.5).abs() < 0.002, "{vertical}");
}

#[test]
fn simulate_replays_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(dir.path(), &torus_doc(json!({"record_times": [0.5, 0.55, 1.0]})));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(imub(&["--out", a.to_str().unwrap(), "--workers", "1", "simulate", "--config", &doc]).status.success());
    assert!(imub(&["--out", b.to_str().unwrap(), "--workers", "3", "simulate", "--config", &doc]).status.success());
    for name in ["paths_eps_0.1.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let rows = read(a.join("paths_eps_0.1.csv")).lines().count();
    assert_eq!(rows, 1 + 2000 * 3);
}

#[test]
fn zero_horizon_echoes_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(dir.path(), &torus_doc(json!({"horizon": 0.0, "replicas": 4})));
    assert!(imub(&["--out", dir.path().to_str().unwrap(), "simulate", "--config", &doc]).status.success());
    let text = read(dir.path().join("paths_eps_0.1.csv"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let expected = [(-1, 1.0, 0.0), (0, 0.0, 2.0), (1, 0.5, 0.0)];
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        assert_eq!(&rec[col("time")], "0");
        for (site, a, b) in expected {
            assert_eq!(rec[col(&format!("type1[{site}]"))].parse::<f64>().unwrap(), a);
            assert_eq!(rec[col(&format!("type2[{site}]"))].parse::<f64>().unwrap(), b);
        }
        assert_eq!(rec[col("m_re[0]")].parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(rows, 4);
}

#[test]
fn epsilon_beyond_horizon_warns_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write_doc(dir.path(), &torus_doc(json!({"epsilons": [2.0], "replicas": 3})));
    let o = imub(&["--out", dir.path().to_str().unwrap(), "simulate", "--config", &doc]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("without jumps"));
}

#[test]
fn verify_passes_on_genuine_system() {
    let dir = tempfile::tempdir().unwrap();
    let doc = torus_doc(json!({"replicas": 20000, "verify": {"site": 0, "time": 0.5}}));
    let doc = write_doc(dir.path(), &doc);
    let o = imub(&["--out", dir.path().to_str().unwrap(), "verify", "--config", &doc, "--suite", "martingale,marginal,correlation"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: Value = serde_json::from_str(&read(dir.path().join("verify_report.json"))).unwrap();
    assert_eq!(report["pass"], json!(true));
    for suite in report["suites"].as_array().unwrap() {
        for r in suite["reports"].as_array().unwrap() {
            for key in ["test", "params", "estimate", "se_or_statistic", "threshold", "pass"] {
                assert!(r.get(key).is_some(), "{key} missing");
            }
        }
    }
}

#[test]
fn corrupted_drift_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let doc = torus_doc(json!({"replicas": 20000, "verify": {"drift_scale": 2.0}}));
    let doc = write_doc(dir.path(), &doc);
    let o = imub(&["--out", dir.path().to_str().unwrap(), "verify", "--config", &doc, "--suite", "martingale"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn understated_growth_rate_is_caught() {
    // Strong outward migration with a zero growth rate in the Doob bound.
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "matrix": {"kind": "explicit", "sites": [0, 1], "entries": [[0, 1, 3.0], [1, 0, 3.0]]},
        "initial": [{"site": 0, "type1": 1.0, "type2": 0.0}, {"site": 1, "type1": 0.0, "type2": 1.0}],
        "epsilons": [0.1],
        "horizon": 1.0,
        "replicas": 20000,
        "seed": 4,
        "verify": {"doob_level": 4.0, "doob_growth_override": 0.0}
    });
    let doc = write_doc(dir.path(), &doc);
    let o = imub(&["--out", dir.path().to_str().unwrap(), "verify", "--config", &doc, "--suite", "doob"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_documents_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        torus_doc(json!({"initial": [{"site": 7, "type1": 1.0, "type2": 0.0}]})),
        torus_doc(json!({"epsilons": []})),
        torus_doc(json!({"unexpected": 1})),
        torus_doc(json!({"record_times": [0.5, 0.2]})),
        torus_doc(json!({"verify": {"time": 0.55}})),
    ] {
        let doc = write_doc(dir.path(), &bad);
        let o = imub(&["--out", dir.path().to_str().unwrap(), "verify", "--config", &doc, "--suite", "marginal"]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn system_suites_need_a_document() {
    let dir = tempfile::tempdir().unwrap();
    let o = imub(&["--out", dir.path().to_str().unwrap(), "verify", "--suite", "martingale"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        imub::cli::Experiment::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
