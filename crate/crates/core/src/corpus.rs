//! Corpus scanning, profile differentials, and per-workflow timing.
//!
//! A corpus is either a flat directory of workflow files or a tree of
//! repository checkouts; in the latter case discovery is restricted to
//! `.github/workflows/` directories. Timing measures the in-process scan
//! (parse plus all detectors) with a monotonic clock and keeps every raw
//! sample.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::detect::{run_all, Services};
use crate::finding::{Finding, ScanDiagnostic, Weakness};
use crate::model::{list_action_refs, parse_workflow};
use crate::profile::Profile;
use crate::report::{summarize, FileFindings, WeaknessMatrix};
use crate::span::SourceSpan;

#[derive(Debug, Clone, Serialize)]
pub struct WorkflowEntry {
    pub path: String,
    /// Lines of code (total lines in the file).
    pub loc: usize,
    pub job_count: usize,
    /// Distinct trigger event types.
    pub trigger_count: usize,
    /// `uses:` references in steps and reusable-workflow calls.
    pub reused_action_count: usize,
    pub findings: Vec<Finding>,
    /// One duration per repetition, in seconds.
    pub timing_samples_secs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct CorpusReport {
    pub profile: String,
    pub repetitions: usize,
    pub entries: Vec<WorkflowEntry>,
    pub errors: Vec<CorpusError>,
    pub diagnostics: Vec<ScanDiagnostic>,
    pub matrix: WeaknessMatrix,
}

impl CorpusReport {
    pub fn per_workflow_findings(&self) -> Vec<FileFindings> {
        self.entries
            .iter()
            .map(|e| FileFindings {
                path: e.path.clone(),
                findings: e.findings.clone(),
            })
            .collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

fn is_workflow_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("yml") | Some("yaml")
    )
}

/// Workflow files under `root`, sorted for determinism. When the tree
/// contains `.github/workflows` directories, discovery is restricted to
/// them (repository-checkout layout); otherwise every YAML file counts
/// (flat corpus layout).
pub fn discover_workflows(root: &Path) -> Vec<PathBuf> {
    let mut in_workflow_dirs = Vec::new();
    let mut all_yaml = Vec::new();
    for entry in walkdir::WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_map(Result::ok)
    {
        if !entry.file_type().is_file() || !is_workflow_file(entry.path()) {
            continue;
        }
        let path = entry.into_path();
        let inside_workflows = path
            .parent()
            .map(|p| p.ends_with(".github/workflows"))
            .unwrap_or(false);
        if inside_workflows {
            in_workflow_dirs.push(path.clone());
        }
        all_yaml.push(path);
    }
    let mut chosen = if in_workflow_dirs.is_empty() {
        all_yaml
    } else {
        in_workflow_dirs
    };
    chosen.sort();
    chosen
}

/// Scan every workflow under `root`, timing each scan `repetitions` times.
///
/// Timing runs execute serially to avoid contention skew. Findings come
/// from the final repetition; detectors are deterministic, so every
/// repetition produces the same list. Unparseable files are recorded as
/// errors, never fatal.
pub fn scan_corpus(
    root: &Path,
    profile: &Profile,
    services: &Services<'_>,
    repetitions: usize,
) -> CorpusReport {
    let repetitions = repetitions.max(1);
    let mut report = CorpusReport {
        profile: profile.name.clone(),
        repetitions,
        entries: Vec::new(),
        errors: Vec::new(),
        diagnostics: Vec::new(),
        matrix: WeaknessMatrix::default(),
    };

    for path in discover_workflows(root) {
        let display = path.display().to_string();
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) => {
                report.errors.push(CorpusError {
                    path: display,
                    message: format!("read failed: {err}"),
                });
                continue;
            }
        };

        let mut samples = Vec::with_capacity(repetitions);
        let mut last = None;
        let mut parse_error = None;
        for _ in 0..repetitions {
            let started = Instant::now();
            match parse_workflow(&bytes, &display) {
                Ok(parsed) => {
                    let outcome = run_all(&parsed.doc, &parsed.report, profile, services);
                    samples.push(started.elapsed());
                    last = Some((parsed, outcome));
                }
                Err(err) => {
                    samples.push(started.elapsed());
                    parse_error = Some(err.to_string());
                }
            }
        }

        match last {
            Some((parsed, outcome)) => {
                report
                    .diagnostics
                    .extend(outcome.diagnostics.into_iter().map(|d| ScanDiagnostic {
                        detector: d.detector,
                        message: format!("{display}: {}", d.message),
                    }));
                report.entries.push(WorkflowEntry {
                    path: display,
                    loc: parsed.doc.source.lines().count(),
                    job_count: parsed.doc.jobs.len(),
                    trigger_count: {
                        let mut events: Vec<&str> =
                            parsed.doc.triggers.iter().map(|t| t.event.as_str()).collect();
                        events.sort_unstable();
                        events.dedup();
                        events.len()
                    },
                    reused_action_count: list_action_refs(&parsed.doc, false).len(),
                    findings: outcome.findings,
                    timing_samples_secs: samples.iter().map(Duration::as_secs_f64).collect(),
                });
            }
            None => {
                report.errors.push(CorpusError {
                    path: display,
                    message: parse_error.unwrap_or_else(|| "parse failed".to_string()),
                });
            }
        }
    }

    report.matrix = summarize(&report.per_workflow_findings());
    report
}

// ---------------------------------------------------------------------------
// Profile differentials
// ---------------------------------------------------------------------------

/// Identity of one finding for cross-profile comparison.
pub type FindingKey = (String, SourceSpan, Weakness);

#[derive(Debug, Default, Clone, Serialize)]
pub struct DivergenceRow {
    pub common: Vec<FindingKey>,
    pub only_a: Vec<FindingKey>,
    pub only_b: Vec<FindingKey>,
}

#[derive(Debug, Serialize)]
pub struct DivergenceReport {
    pub profile_a: String,
    pub profile_b: String,
    pub per_weakness: BTreeMap<Weakness, DivergenceRow>,
}

impl DivergenceReport {
    pub fn total_only_a(&self) -> usize {
        self.per_weakness.values().map(|r| r.only_a.len()).sum()
    }

    pub fn total_only_b(&self) -> usize {
        self.per_weakness.values().map(|r| r.only_b.len()).sum()
    }

    pub fn total_common(&self) -> usize {
        self.per_weakness.values().map(|r| r.common.len()).sum()
    }
}

fn finding_keys(report: &CorpusReport) -> Vec<FindingKey> {
    let mut keys: Vec<FindingKey> = report
        .entries
        .iter()
        .flat_map(|e| {
            e.findings
                .iter()
                .map(|f| (e.path.clone(), f.span, f.weakness))
        })
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

/// Scan the corpus under two profiles and report agreement and divergence
/// per weakness, keyed by `(path, span, weakness)`.
pub fn diff_profiles(
    root: &Path,
    profile_a: &Profile,
    profile_b: &Profile,
    services: &Services<'_>,
) -> DivergenceReport {
    let a = scan_corpus(root, profile_a, services, 1);
    let b = scan_corpus(root, profile_b, services, 1);
    let keys_a = finding_keys(&a);
    let keys_b = finding_keys(&b);

    let mut report = DivergenceReport {
        profile_a: profile_a.name.clone(),
        profile_b: profile_b.name.clone(),
        per_weakness: BTreeMap::new(),
    };
    for weakness in Weakness::ALL {
        report.per_weakness.insert(weakness, DivergenceRow::default());
    }
    for key in &keys_a {
        let row = report.per_weakness.entry(key.2).or_default();
        if keys_b.binary_search(key).is_ok() {
            row.common.push(key.clone());
        } else {
            row.only_a.push(key.clone());
        }
    }
    for key in &keys_b {
        if keys_a.binary_search(key).is_err() {
            report.per_weakness.entry(key.2).or_default().only_b.push(key.clone());
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub path: String,
    pub loc: usize,
    pub median_secs: f64,
    pub min_secs: f64,
    pub max_secs: f64,
}

#[derive(Debug, Serialize)]
pub struct TimingReport {
    /// Rows sorted by lines of code, ascending.
    pub rows: Vec<TimingRow>,
    pub aggregate_min_secs: f64,
    pub aggregate_median_secs: f64,
    pub aggregate_max_secs: f64,
}

/// Median with the even-count convention of averaging the middle two.
pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Per-workflow and aggregate timing statistics, sorted by workflow size.
pub fn timing_report(report: &CorpusReport) -> TimingReport {
    let mut rows: Vec<TimingRow> = report
        .entries
        .iter()
        .map(|e| TimingRow {
            path: e.path.clone(),
            loc: e.loc,
            median_secs: median(&e.timing_samples_secs),
            min_secs: e
                .timing_samples_secs
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            max_secs: e.timing_samples_secs.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    rows.sort_by(|a, b| (a.loc, &a.path).cmp(&(b.loc, &b.path)));

    let medians: Vec<f64> = rows.iter().map(|r| r.median_secs).collect();
    TimingReport {
        aggregate_min_secs: medians.iter().copied().fold(f64::INFINITY, f64::min),
        aggregate_median_secs: median(&medians),
        aggregate_max_secs: medians.iter().copied().fold(0.0, f64::max),
        rows,
    }
}

/// CSV of `(path, loc, median duration)` sorted by lines of code.
pub fn timing_csv(report: &TimingReport) -> String {
    let mut out = String::from("path,loc,median_seconds\n");
    for row in &report.rows {
        out.push_str(&format!("{},{},{:.9}\n", row.path, row.loc, row.median_secs));
    }
    out
}
