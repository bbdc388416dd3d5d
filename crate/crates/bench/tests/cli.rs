use std::path::Path;
use std::process::{Command, Output};

use slicewise_bench::report::Report;
use slicewise_bench::CaseStatus;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two phantoms plus a manifest whose last `broken` entries point at missing files.
fn setup(dir: &Path, broken: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let cases = dir.join("cases");
    let out = bench(&[
        "phantoms",
        "--out",
        s(&cases),
        "--count",
        "2",
        "--seed",
        "5",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = cases.join("manifest.json");
    let mut entries: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    for (i, e) in entries.iter_mut().rev().take(broken).enumerate() {
        e["image_path"] = format!("missing_{i}.nii.gz").into();
    }
    std::fs::write(&manifest, serde_json::to_string(&entries).unwrap()).unwrap();
    let config = dir.join("config.json");
    std::fs::write(&config, r#"{"mode": "gt_mask", "task": "spleen"}"#).unwrap();
    (manifest, config)
}

#[test]
fn clean_run_exits_zero_and_renders_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, config) = setup(dir.path(), 0);
    let json = dir.path().join("r.json");
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&json),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = Report::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.cases.len(), 2);
    assert!(report.cases.iter().all(|c| c.status == CaseStatus::Ok));

    let csv = dir.path().join("r.csv");
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&csv),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("case_id,dice,nsd,hd95,salient_dice,salient_nsd,rounds_used,status"));
    assert_eq!(text.lines().count(), 3);

    let md = dir.path().join("r.md");
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&md),
        "--format",
        "md",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&md)
        .unwrap()
        .contains("ours (1 mask)"));

    let out = bench(&["tables", "--report", s(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let tables = String::from_utf8(out.stdout).unwrap();
    assert!(
        tables.contains("MECCA") && tables.contains("ours (1 mask) (salient area)"),
        "{tables}"
    );
}

#[test]
fn failed_cases_give_exit_codes_two_and_three() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, config) = setup(dir.path(), 1);
    let out_path = dir.path().join("partial.json");
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report = Report::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report.cases[1].status, CaseStatus::Failed);
    assert!(report.cases[1]
        .error
        .as_ref()
        .unwrap()
        .contains("missing_0"));
    assert_eq!(report.summary.as_ref().unwrap().count, 1);

    let dir = tempfile::tempdir().unwrap();
    let (manifest, config) = setup(dir.path(), 2);
    let out_path = dir.path().join("none.json");
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&config),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = Report::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report.summary.is_none());
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bench(&["run"]).status.code(), Some(64));
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(bench(&["--help"]).status.code(), Some(0));

    let (manifest, _) = setup(dir.path(), 0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mode": {"clicks": 0}}"#).unwrap();
    let out = bench(&[
        "run",
        "--manifest",
        s(&manifest),
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(64));
    assert_eq!(
        bench(&["phantoms", "--out", s(dir.path()), "--count", "0"])
            .status
            .code(),
        Some(64)
    );
}

#[test]
fn eval_scores_a_prediction() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), 0);
    let gt = dir.path().join("cases/phantom_000_label.nii.gz");
    let out = bench(&["eval", "--pred", s(&gt), "--gt", s(&gt)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dice"], 1.0);
    assert_eq!(v["nsd"], 1.0);
    assert_eq!(v["hd95"], 0.0);
    assert!(v["salient_slices"].as_u64().unwrap() > 0);

    let other = dir.path().join("cases/phantom_001_label.nii.gz");
    let v: serde_json::Value =
        serde_json::from_slice(&bench(&["eval", "--pred", s(&other), "--gt", s(&gt)]).stdout)
            .unwrap();
    assert!(v["dice"].as_f64().unwrap() < 1.0);
}
