//! Finding aggregation and output: JSON, SARIF 2.1.0, the per-weakness
//! matrix, and the human-readable report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::catalog::{self, UnknownRule};
use crate::finding::{Finding, Severity, Weakness};

/// Findings of one workflow file.
#[derive(Debug, Clone, Serialize)]
pub struct FileFindings {
    pub path: String,
    pub findings: Vec<Finding>,
}

/// Metadata describing one scan invocation.
#[derive(Debug, Clone, Serialize)]
pub struct ScanMeta {
    pub tool_name: String,
    pub tool_version: String,
    pub profile: String,
    /// Every file covered by the scan, findings or not.
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
}

impl ScanMeta {
    pub fn new(profile: &str, files: Vec<String>) -> ScanMeta {
        ScanMeta {
            tool_name: "wf-sentinel".to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            profile: profile.to_string(),
            files,
            duration_ms: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("finding references `{path}`, which is not among the scanned files")]
    UnknownFile { path: String },
    #[error(transparent)]
    UnknownRule(#[from] UnknownRule),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Rule id to weakness class and CWE list. Total over the shipped catalog;
/// unknown rule ids are an error.
pub fn map_rule_to_weakness(rule_id: &str) -> Result<(Weakness, Vec<String>), UnknownRule> {
    let meta = catalog::rule(rule_id)?;
    Ok((
        meta.weakness,
        meta.cwe.iter().map(|c| c.to_string()).collect(),
    ))
}

/// One row of the per-weakness matrix: total findings in bold terms, and
/// the number of distinct workflows with at least one finding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub total_findings: usize,
    pub workflows_with_finding: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WeaknessMatrix {
    pub rows: BTreeMap<Weakness, MatrixRow>,
}

impl WeaknessMatrix {
    pub fn row(&self, weakness: Weakness) -> MatrixRow {
        self.rows.get(&weakness).copied().unwrap_or_default()
    }
}

/// Aggregate findings into the per-weakness matrix.
pub fn summarize(per_workflow: &[FileFindings]) -> WeaknessMatrix {
    let mut matrix = WeaknessMatrix::default();
    for weakness in Weakness::ALL {
        matrix.rows.insert(weakness, MatrixRow::default());
    }
    for file in per_workflow {
        let mut seen: Vec<Weakness> = Vec::new();
        for finding in &file.findings {
            let row = matrix.rows.entry(finding.weakness).or_default();
            row.total_findings += 1;
            if !seen.contains(&finding.weakness) {
                seen.push(finding.weakness);
                row.workflows_with_finding += 1;
            }
        }
    }
    matrix
}

/// Render the matrix as an aligned text table.
pub fn matrix_table(matrix: &WeaknessMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:>10} {:>12}\n",
        "class", "findings", "workflows"
    ));
    for (weakness, row) in &matrix.rows {
        out.push_str(&format!(
            "{:<6} {:>10} {:>12}\n",
            weakness.acronym(),
            row.total_findings,
            row.workflows_with_finding
        ));
    }
    out
}

pub fn matrix_csv(matrix: &WeaknessMatrix) -> String {
    let mut out = String::from("weakness,total_findings,workflows_with_finding\n");
    for (weakness, row) in &matrix.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            weakness.acronym(),
            row.total_findings,
            row.workflows_with_finding
        ));
    }
    out
}

fn sorted_findings(per_workflow: &[FileFindings]) -> Vec<(&str, &Finding)> {
    let mut all: Vec<(&str, &Finding)> = per_workflow
        .iter()
        .flat_map(|f| f.findings.iter().map(move |finding| (f.path.as_str(), finding)))
        .collect();
    all.sort_by(|(pa, fa), (pb, fb)| {
        (pa, fa.span.start_byte, &fa.rule_id).cmp(&(pb, fb.span.start_byte, &fb.rule_id))
    });
    all
}

/// Stable JSON report. Identical inputs produce identical bytes: object
/// keys serialize in sorted order and findings are sorted by
/// `(file, start_byte, rule_id)`.
pub fn emit_json(per_workflow: &[FileFindings], meta: &ScanMeta) -> Result<Vec<u8>, ReportError> {
    let findings: Vec<serde_json::Value> = sorted_findings(per_workflow)
        .into_iter()
        .map(|(path, finding)| {
            let mut value = serde_json::to_value(finding)?;
            value
                .as_object_mut()
                .expect("finding serializes to an object")
                .insert("path".to_string(), serde_json::Value::String(path.to_string()));
            Ok(value)
        })
        .collect::<Result<_, serde_json::Error>>()?;
    let matrix = summarize(per_workflow);
    let doc = serde_json::json!({
        "tool": { "name": meta.tool_name, "version": meta.tool_version },
        "profile": meta.profile,
        "files": meta.files,
        "duration_ms": meta.duration_ms,
        "findings": findings,
        "summary": matrix.rows.iter().map(|(w, row)| {
            (w.acronym().to_string(), serde_json::json!({
                "total_findings": row.total_findings,
                "workflows_with_finding": row.workflows_with_finding,
            }))
        }).collect::<serde_json::Map<String, serde_json::Value>>(),
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn sarif_level(severity: Severity) -> &'static str {
    match severity {
        Severity::Low => "note",
        Severity::Medium => "warning",
        Severity::High | Severity::Critical => "error",
    }
}

/// SARIF 2.1.0 document: one run, the full rule catalog, and one result per
/// finding with physical line/column locations.
pub fn emit_sarif(per_workflow: &[FileFindings], meta: &ScanMeta) -> Result<Vec<u8>, ReportError> {
    for file in per_workflow {
        if !meta.files.contains(&file.path) {
            return Err(ReportError::UnknownFile {
                path: file.path.clone(),
            });
        }
    }

    let rules: Vec<serde_json::Value> = catalog::all_rules()
        .iter()
        .map(|rule| {
            serde_json::json!({
                "id": rule.id,
                "name": rule.id.replace('.', "/"),
                "shortDescription": { "text": rule.summary },
                "fullDescription": { "text": rule.rationale },
                "defaultConfiguration": { "level": sarif_level(rule.default_severity) },
                "properties": {
                    "weakness": rule.weakness.acronym(),
                    "weakness_name": rule.weakness.full_name(),
                    "cwe": rule.cwe,
                    "profiles": rule.enabled_in(),
                },
            })
        })
        .collect();
    let rule_index: BTreeMap<&str, usize> = catalog::all_rules()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();
    let artifact_index: BTreeMap<&str, usize> = meta
        .files
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();

    let results: Vec<serde_json::Value> = sorted_findings(per_workflow)
        .into_iter()
        .map(|(path, finding)| {
            let location = |span: &crate::span::SourceSpan| {
                serde_json::json!({
                    "physicalLocation": {
                        "artifactLocation": {
                            "uri": path,
                            "index": artifact_index[path],
                        },
                        "region": {
                            "startLine": span.start_line,
                            "startColumn": span.start_col,
                            "endLine": span.end_line,
                            "endColumn": span.end_col,
                        },
                    }
                })
            };
            let mut result = serde_json::json!({
                "ruleId": finding.rule_id,
                "ruleIndex": rule_index[finding.rule_id.as_str()],
                "level": sarif_level(finding.severity),
                "message": { "text": finding.message },
                "locations": [location(&finding.span)],
                "properties": {
                    "weakness": finding.weakness.acronym(),
                    "cwe": finding.cwe,
                    "confidence": format!("{:?}", finding.confidence).to_lowercase(),
                },
            });
            if !finding.related.is_empty() {
                let related: Vec<serde_json::Value> = finding
                    .related
                    .iter()
                    .map(|r| {
                        let mut loc = location(&r.span);
                        loc.as_object_mut().expect("object").insert(
                            "message".to_string(),
                            serde_json::json!({ "text": r.label }),
                        );
                        loc
                    })
                    .collect();
                result
                    .as_object_mut()
                    .expect("object")
                    .insert("relatedLocations".to_string(), serde_json::json!(related));
            }
            result
        })
        .collect();

    let artifacts: Vec<serde_json::Value> = meta
        .files
        .iter()
        .map(|p| serde_json::json!({ "location": { "uri": p } }))
        .collect();

    let doc = serde_json::json!({
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [{
            "tool": {
                "driver": {
                    "name": meta.tool_name,
                    "version": meta.tool_version,
                    "informationUri": "https://github.com/wf-sentinel/wf-sentinel",
                    "rules": rules,
                }
            },
            "artifacts": artifacts,
            "results": results,
        }],
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Human-readable report grouped by weakness then file, with source
/// excerpts. Color is plain ANSI, opt-in.
pub fn render_text(
    per_workflow: &[FileFindings],
    sources: &BTreeMap<String, String>,
    color: bool,
) -> String {
    let paint = |code: &str, text: &str| {
        if color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    };
    let severity_color = |s: Severity| match s {
        Severity::Critical => "1;31",
        Severity::High => "31",
        Severity::Medium => "33",
        Severity::Low => "36",
    };

    let mut out = String::new();
    let mut by_weakness: BTreeMap<Weakness, Vec<(&str, &Finding)>> = BTreeMap::new();
    for (path, finding) in sorted_findings(per_workflow) {
        by_weakness.entry(finding.weakness).or_default().push((path, finding));
    }

    if by_weakness.is_empty() {
        out.push_str("no findings\n");
        return out;
    }

    for (weakness, findings) in &by_weakness {
        out.push_str(&paint(
            "1",
            &format!(
                "{} — {} ({} finding{})\n",
                weakness.acronym(),
                weakness.full_name(),
                findings.len(),
                if findings.len() == 1 { "" } else { "s" }
            ),
        ));
        for (path, finding) in findings {
            out.push_str(&format!(
                "  {} {}:{} [{}] {}\n",
                paint(severity_color(finding.severity), finding.severity.as_str()),
                path,
                finding.span.start_line,
                finding.rule_id,
                finding.message
            ));
            if let Some(source) = sources.get(*path) {
                if let Some(line) = source.lines().nth(finding.span.start_line.saturating_sub(1)) {
                    out.push_str(&format!("      | {}\n", line.trim_end()));
                }
            }
            for related in &finding.related {
                out.push_str(&format!(
                    "      ~ {} (line {})\n",
                    related.label, related.span.start_line
                ));
            }
        }
        out.push('\n');
    }

    let matrix = summarize(per_workflow);
    out.push_str(&matrix_table(&matrix));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::SourceSpan;

    fn finding(rule: &str, start: usize) -> Finding {
        catalog::rule(rule)
            .unwrap()
            .finding(
                SourceSpan::new(start, start + 4, 1, 1, 1, 5),
                format!("test finding for {rule}"),
            )
            .build()
    }

    #[test]
    fn rule_mapping_examples() {
        let (weakness, cwe) = map_rule_to_weakness("udw.unpinned-uses").unwrap();
        assert_eq!(weakness, Weakness::Udw);
        assert_eq!(cwe, vec!["CWE-829"]);
        let (weakness, cwe) = map_rule_to_weakness("tmw.pull-request-target").unwrap();
        assert_eq!(weakness, Weakness::Tmw);
        assert_eq!(cwe, vec!["CWE-862"]);
        assert!(map_rule_to_weakness("nonexistent.rule").is_err());
    }

    #[test]
    fn summarize_counts_totals_and_workflows() {
        let one = FileFindings {
            path: "a.yml".into(),
            findings: vec![
                finding("udw.unpinned-uses", 0),
                finding("udw.unpinned-uses", 10),
                finding("udw.unpinned-uses", 20),
            ],
        };
        let matrix = summarize(std::slice::from_ref(&one));
        assert_eq!(matrix.row(Weakness::Udw).total_findings, 3);
        assert_eq!(matrix.row(Weakness::Udw).workflows_with_finding, 1);

        let two = FileFindings {
            path: "b.yml".into(),
            findings: vec![finding("udw.unpinned-uses", 0)],
        };
        let mut first = one;
        first.findings.pop();
        let matrix = summarize(&[first, two]);
        assert_eq!(matrix.row(Weakness::Udw).total_findings, 3);
        assert_eq!(matrix.row(Weakness::Udw).workflows_with_finding, 2);
    }

    #[test]
    fn empty_json_report_is_valid() {
        let meta = ScanMeta::new("balanced", vec![]);
        let bytes = emit_json(&[], &meta).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(value["findings"].as_array().unwrap().len(), 0);
        assert_eq!(value["profile"], "balanced");
    }

    #[test]
    fn json_bytes_are_deterministic() {
        let files = vec![FileFindings {
            path: "wf.yml".into(),
            findings: (0..100).map(|i| finding("udw.unpinned-uses", i * 8)).collect(),
        }];
        let meta = ScanMeta::new("balanced", vec!["wf.yml".into()]);
        let a = emit_json(&files, &meta).unwrap();
        let b = emit_json(&files, &meta).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parsing_emitted_json_reproduces_the_findings() {
        let files = vec![
            FileFindings {
                path: "a.yml".into(),
                findings: vec![finding("udw.unpinned-uses", 4), finding("iw.untrusted-run", 90)],
            },
            FileFindings {
                path: "b.yml".into(),
                findings: vec![finding("sew.secrets-inherit", 12)],
            },
        ];
        let meta = ScanMeta::new("balanced", vec!["a.yml".into(), "b.yml".into()]);
        let bytes = emit_json(&files, &meta).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();

        let mut recovered: Vec<(String, Finding)> = value["findings"]
            .as_array()
            .unwrap()
            .iter()
            .map(|entry| {
                let path = entry["path"].as_str().unwrap().to_string();
                let mut own = entry.clone();
                own.as_object_mut().unwrap().remove("path");
                (path, serde_json::from_value(own).unwrap())
            })
            .collect();
        recovered.sort_by(|(pa, fa), (pb, fb)| {
            (pa, fa.span.start_byte).cmp(&(pb, fb.span.start_byte))
        });

        let mut original: Vec<(String, Finding)> = files
            .iter()
            .flat_map(|f| f.findings.iter().map(move |x| (f.path.clone(), x.clone())))
            .collect();
        original.sort_by(|(pa, fa), (pb, fb)| {
            (pa, fa.span.start_byte).cmp(&(pb, fb.span.start_byte))
        });

        assert_eq!(recovered.len(), original.len());
        for ((pa, a), (pb, b)) in recovered.iter().zip(original.iter()) {
            assert_eq!(pa, pb);
            assert_eq!(a.rule_id, b.rule_id);
            assert_eq!(a.weakness, b.weakness);
            assert_eq!(a.cwe, b.cwe);
            assert_eq!(a.severity, b.severity);
            assert_eq!(a.confidence, b.confidence);
            assert_eq!(a.span, b.span);
            assert_eq!(a.message, b.message);
        }
    }

    #[test]
    fn sarif_requires_known_files() {
        let files = vec![FileFindings {
            path: "ghost.yml".into(),
            findings: vec![finding("udw.unpinned-uses", 0)],
        }];
        let meta = ScanMeta::new("balanced", vec!["other.yml".into()]);
        assert!(matches!(
            emit_sarif(&files, &meta),
            Err(ReportError::UnknownFile { .. })
        ));
    }

    #[test]
    fn empty_sarif_is_minimal_and_valid() {
        let meta = ScanMeta::new("balanced", vec![]);
        let bytes = emit_sarif(&[], &meta).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(value["version"], "2.1.0");
        assert_eq!(value["runs"].as_array().unwrap().len(), 1);
        assert!(value["runs"][0]["results"].as_array().unwrap().is_empty());
    }

    #[test]
    fn severity_maps_to_sarif_level_by_table() {
        assert_eq!(sarif_level(Severity::Low), "note");
        assert_eq!(sarif_level(Severity::Medium), "warning");
        assert_eq!(sarif_level(Severity::High), "error");
        assert_eq!(sarif_level(Severity::Critical), "error");
    }

    #[test]
    fn text_report_groups_by_weakness() {
        let files = vec![FileFindings {
            path: "wf.yml".into(),
            findings: vec![finding("udw.unpinned-uses", 0), finding("iw.untrusted-run", 8)],
        }];
        let mut sources = BTreeMap::new();
        sources.insert("wf.yml".to_string(), "uses: a@v1 and more\n".to_string());
        let text = render_text(&files, &sources, false);
        assert!(text.contains("UDW — Unpinned Dependency Weakness"));
        assert!(text.contains("IW — Injection Weakness"));
        assert!(text.contains("wf.yml:1"));
    }
}
