use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclic-teleport"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn demo_is_deterministic_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "demo", "--alpha", "1", "--theta", "0.785", "0.6", "0.4", "--seed", "7", "--out", "t.jsonl",
    ];
    let a = bin(&args, dir.path());
    let trace_a = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    let b = bin(&args, dir.path());
    let trace_b = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(trace_a, trace_b);
    for line in trace_a.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["t", "actor", "action", "payload"] {
            assert!(v.get(key).is_some(), "{line}");
        }
    }
}

#[test]
fn faithful_demo_prints_unit_fidelity() {
    // seed 15 samples an all-even event at the defaults
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["demo", "--seed", "15", "--out", "t.jsonl"], dir.path());
    let s = stdout(&o);
    assert!(s.contains("parities EEE"), "{s}");
    assert_eq!(s.matches("F = 1.000000 (faithful)").count(), 3, "{s}");
}

#[test]
fn bad_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["demo", "--alpha", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    assert_eq!(
        bin(&["verify", "--alpha", "2.6"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&["enumerate", "--format", "xml"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn enumerate_footer_reports_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["enumerate", "--out", "e.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 41 * 41 * 41 + 1);
    let footer = rows.last().unwrap();
    assert_eq!(&footer[6], "TOTAL");
    assert!(footer[7].starts_with("ambiguous="));
    let total: f64 = footer[8].parse().unwrap();
    assert!(total >= 1.0 - 1e-9);
}

#[test]
fn tables_writes_table_and_diff() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["tables", "--out", "tab"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("tab/derived_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 65);
    assert_eq!(table.lines().filter(|l| l.ends_with(",true")).count(), 8);
    let diff = std::fs::read_to_string(dir.path().join("tab/table_diff.csv")).unwrap();
    assert!(diff.contains("PrintedTypo") && diff.contains("LayoutDivergence"));
}

#[test]
fn sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--alpha-grid",
        "0.5,1,1.5",
        "--theta1-grid",
        "0,0.7,1.4",
        "--out",
        "s.csv",
        "--summary",
        "s.json",
    ];
    bin(&args, dir.path());
    let a = std::fs::read(dir.path().join("s.csv")).unwrap();
    bin(&args, dir.path());
    let b = std::fs::read(dir.path().join("s.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",AVG,")).count(), 27);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    for key in ["params", "totals", "chains", "notes"] {
        assert!(summary.get(key).is_some());
    }
}

#[test]
fn verify_flags_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin(&["verify", "--alpha", "0.7", "--samples", "1"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("PASS"));
    let bad = bin(
        &[
            "verify",
            "--alpha",
            "0.7",
            "--samples",
            "1",
            "--perturb",
            "1e-3",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    let s = stdout(&bad);
    assert!(s.contains("FAIL") && s.contains("event ("), "{s}");
}

#[test]
fn audit_emits_deviation_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        &["audit", "--format", "json", "--out", "a.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(v["audit"]["rows"].as_array().unwrap().len(), 18);
    assert_eq!(v["flatness"]["points"].as_array().unwrap().len(), 25);
}
