//! End-to-end tests of the `wf-sentinel` binary: exit-status contract,
//! output formats, config handling, and the fix workflow.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wf-sentinel"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).unwrap();
    }
    std::fs::write(path, content).unwrap();
}

const HARDENED: &str = "on: push\npermissions:\n  contents: read\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - run: echo hi\n";

const UNPINNED: &str = "name: crowdin-upload\non: schedule\njobs:\n  upload:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v3\n      - uses: freecodecamp/crowdin-action@main\n";

#[test]
fn hardened_minimal_workflow_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ci.yml", HARDENED);
    let out = run_in(dir.path(), &["scan", "ci.yml", "--profile", "conservative"]);
    assert!(
        out.status.code() == Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("no findings"));
}

#[test]
fn unpinned_snippet_fails_at_medium() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    let out = run_in(dir.path(), &["scan", "wf.yml", "--fail-on", "medium"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("udw.unpinned-uses"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_subcommand = run_in(dir.path(), &["bogus"]);
    assert_eq!(unknown_subcommand.status.code(), Some(2));

    write(dir.path(), "wf.yml", HARDENED);
    let bad_profile = run_in(dir.path(), &["scan", "wf.yml", "--profile", "strictest"]);
    assert_eq!(bad_profile.status.code(), Some(2));

    let missing_path = run_in(dir.path(), &["scan", "no-such-file.yml"]);
    assert_eq!(missing_path.status.code(), Some(2));
}

#[test]
fn strict_config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", HARDENED);
    write(dir.path(), "wf-sentinel.yml", "permisions: read\n");
    let out = run_in(dir.path(), &["scan", "wf.yml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("permisions"));
}

#[test]
fn json_output_is_parseable_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    let first = run_in(dir.path(), &["scan", "wf.yml", "--format", "json"]);
    let second = run_in(dir.path(), &["scan", "wf.yml", "--format", "json"]);
    assert_eq!(first.stdout, second.stdout);
    let value: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(value["profile"], "balanced");
    assert!(value["findings"].as_array().unwrap().iter().any(|f| {
        f["rule_id"] == "udw.unpinned-uses"
    }));
}

#[test]
fn sarif_output_has_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    let out = run_in(dir.path(), &["scan", "wf.yml", "--format", "sarif"]);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["version"], "2.1.0");
    let results = value["runs"][0]["results"].as_array().unwrap();
    assert!(!results.is_empty());
    for result in results {
        let index = result["ruleIndex"].as_u64().unwrap() as usize;
        let rules = value["runs"][0]["tool"]["driver"]["rules"].as_array().unwrap();
        assert_eq!(rules[index]["id"], result["ruleId"]);
    }
}

#[test]
fn fix_dry_run_prints_diff_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    let sha = "f43a0e5ff2bd294095638e18286ca9a3d1956744";
    write(
        dir.path(),
        "pins.json",
        &format!(
            "{{\"freecodecamp/crowdin-action@main\": \"{sha}\", \"actions/checkout@v3\": \"{sha}\"}}"
        ),
    );
    write(dir.path(), "wf-sentinel.yml", "pinFixture: pins.json\n");

    let out = run_in(dir.path(), &["fix", "wf.yml", "--dry-run", "--profile", "permissive"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(&format!("+      - uses: freecodecamp/crowdin-action@{sha}  # main")));
    // Dry run leaves the file untouched.
    assert_eq!(std::fs::read_to_string(dir.path().join("wf.yml")).unwrap(), UNPINNED);
}

#[test]
fn fix_applies_and_rescan_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    let sha_a = "f43a0e5ff2bd294095638e18286ca9a3d1956744";
    let sha_b = "1304f174557314a7ed9eddb4eab12fed12cb0cd9";
    write(
        dir.path(),
        "pins.json",
        &format!(
            "{{\"freecodecamp/crowdin-action@main\": \"{sha_a}\", \"actions/checkout@v3\": \"{sha_b}\"}}"
        ),
    );
    write(dir.path(), "wf-sentinel.yml", "pinFixture: pins.json\n");

    let out = run_in(dir.path(), &["fix", "wf.yml", "--profile", "permissive"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fixed = std::fs::read_to_string(dir.path().join("wf.yml")).unwrap();
    assert!(fixed.contains(&format!("crowdin-action@{sha_a}  # main")));
    assert!(fixed.contains(&format!("checkout@{sha_b}  # v3")));

    // The rescan reports no unpinned dependencies at or above medium.
    let rescan = run_in(dir.path(), &["scan", "wf.yml", "--fail-on", "medium", "--profile", "permissive"]);
    assert_eq!(rescan.status.code(), Some(0), "{}", String::from_utf8_lossy(&rescan.stdout));

    // A second fix pass has nothing left to do.
    let second = run_in(dir.path(), &["fix", "wf.yml", "--profile", "permissive"]);
    assert!(String::from_utf8_lossy(&second.stdout).contains("nothing to fix"));
}

#[test]
fn explain_covers_every_catalog_rule() {
    let dir = tempfile::tempdir().unwrap();
    let rules = run_in(dir.path(), &["rules", "--format", "json"]);
    assert_eq!(rules.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_slice(&rules.stdout).unwrap();
    let ids: Vec<String> = value["rules"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap().to_string())
        .collect();
    assert!(ids.len() >= 25, "catalog unexpectedly small: {}", ids.len());
    for id in ids {
        let out = run_in(dir.path(), &["explain", &id]);
        assert_eq!(out.status.code(), Some(0), "explain {id} failed");
        assert!(String::from_utf8_lossy(&out.stdout).contains("cwe:"));
    }
    let unknown = run_in(dir.path(), &["explain", "nonexistent.rule"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn corpus_writes_timing_csv_with_both_samples() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "corpus/a.yml", HARDENED);
    write(dir.path(), "corpus/b.yml", UNPINNED);
    let out = run_in(
        dir.path(),
        &[
            "corpus",
            "corpus",
            "--repeat",
            "2",
            "--timing-csv",
            "timing.csv",
            "--matrix-csv",
            "matrix.csv",
            "--format",
            "json",
            "--fail-on",
            "critical",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["repetitions"], 2);
    assert_eq!(report["entries"].as_array().unwrap().len(), 2);
    for entry in report["entries"].as_array().unwrap() {
        assert_eq!(entry["timing_samples_secs"].as_array().unwrap().len(), 2);
    }

    let csv = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    assert!(csv.starts_with("path,loc,median_seconds\n"));
    assert_eq!(csv.lines().count(), 3);
    let matrix = std::fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    assert!(matrix.contains("UDW,"));
}

#[test]
fn diff_shows_profile_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "corpus/a.yml", UNPINNED);
    write(dir.path(), "corpus/b.yml", HARDENED);
    let out = run_in(
        dir.path(),
        &[
            "diff",
            "corpus",
            "--profiles",
            "conservative,permissive",
            "--format",
            "json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut only_a = 0;
    for (_, row) in value["per_weakness"].as_object().unwrap() {
        only_a += row["only_a"].as_array().unwrap().len();
    }
    assert_eq!(only_a, 0, "conservative must not exceed permissive");
}

#[test]
fn ignore_rules_filter_findings() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "wf.yml", UNPINNED);
    write(dir.path(), "wf-sentinel.yml", "ignoreRules:\n  - \"udw.*\"\n  - \"hgw.*\"\n");
    let out = run_in(dir.path(), &["scan", "wf.yml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
