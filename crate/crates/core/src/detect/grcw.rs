//! GitHub Runner Compatibility Weakness: constructs the platform will
//! reject, skip, or silently ignore.

use once_cell::sync::Lazy;
use serde::Deserialize;

use crate::advisory::parse_version;
use crate::catalog;
use crate::expr::{parse_expression, scan_expressions, Expr, PathSeg};
use crate::finding::Finding;
use crate::model::{ParseReport, StepKind, WorkflowDoc};
use crate::profile::Profile;
use crate::span::SourceSpan;

/// Documented context roots; anything else never resolves.
const KNOWN_CONTEXT_ROOTS: &[&str] = &[
    "github", "env", "vars", "job", "jobs", "steps", "runner", "secrets", "strategy", "matrix",
    "needs", "inputs",
];

#[derive(Debug, Deserialize)]
struct DeprecationEntry {
    slug: String,
    max_deprecated_major: u64,
    reason: String,
}

/// Action versions that no longer run on current GitHub-hosted runners.
/// Ships as data because platform deprecations change faster than code.
static DEPRECATIONS: Lazy<Vec<DeprecationEntry>> = Lazy::new(|| {
    serde_json::from_str(include_str!("../../data/deprecated_actions.json"))
        .expect("bundled deprecation table is valid")
});

pub fn detect_grcw(doc: &WorkflowDoc, report: &ParseReport, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();

    if profile.grcw.deprecated_actions {
        for job in doc.jobs.values() {
            for step in &job.steps {
                let Some(uses) = step.uses() else { continue };
                let Some(slug) = uses.action.slug() else { continue };
                let Some(entry) = DEPRECATIONS.iter().find(|d| d.slug == slug) else {
                    continue;
                };
                let Some(version) = uses.action.ref_name.as_deref().and_then(parse_version)
                else {
                    continue;
                };
                if version.major <= entry.max_deprecated_major {
                    findings.push(
                        catalog::rule("grcw.deprecated-action")
                            .expect("catalog rule")
                            .finding(
                                uses.span,
                                format!(
                                    "`{}` uses a deprecated major version: {}",
                                    uses.action.raw, entry.reason
                                ),
                            )
                            .build(),
                    );
                }
            }
        }
    }

    if profile.grcw.undefined_needs {
        for job in doc.jobs.values() {
            for need in &job.needs {
                if !doc.jobs.contains_key(&need.id) {
                    findings.push(
                        catalog::rule("grcw.undefined-needs")
                            .expect("catalog rule")
                            .finding(
                                need.span,
                                format!(
                                    "job `{}` needs `{}`, which is not defined in this workflow",
                                    job.id, need.id
                                ),
                            )
                            .build(),
                    );
                }
            }
        }
        for (path, span) in needs_references(doc) {
            if !doc.jobs.contains_key(path.as_str()) {
                findings.push(
                    catalog::rule("grcw.undefined-needs")
                        .expect("catalog rule")
                        .finding(
                            span,
                            format!(
                                "expression references `needs.{path}`, but no job `{path}` is \
                                 defined; the expression cannot resolve and the job is skipped"
                            ),
                        )
                        .build(),
                );
            }
        }
    }

    if profile.grcw.structural_anomalies {
        for anomaly in &report.anomalies {
            findings.push(
                catalog::rule("grcw.structural-anomaly")
                    .expect("catalog rule")
                    .finding(anomaly.span, anomaly.message.clone())
                    .build(),
            );
        }
    }

    if profile.grcw.unknown_contexts {
        for (root, span) in context_roots(doc) {
            if !KNOWN_CONTEXT_ROOTS.contains(&root.as_str()) {
                findings.push(
                    catalog::rule("grcw.unknown-context")
                        .expect("catalog rule")
                        .finding(
                            span,
                            format!("`{root}` is not a known expression context root"),
                        )
                        .build(),
                );
            }
        }
    }

    findings
}

/// Job ids referenced through `needs.<id>` in conditions and run scripts.
fn needs_references(doc: &WorkflowDoc) -> Vec<(String, SourceSpan)> {
    let mut out = Vec::new();
    for_each_expression(doc, &mut |ast, span| {
        for path in collect_paths(ast) {
            if let [PathSeg::Name(root), PathSeg::Name(job), ..] = &path.segments[..] {
                if root == "needs" {
                    out.push((job.clone(), span));
                }
            }
        }
    });
    out
}

fn context_roots(doc: &WorkflowDoc) -> Vec<(String, SourceSpan)> {
    let mut out = Vec::new();
    for_each_expression(doc, &mut |ast, span| {
        for path in collect_paths(ast) {
            let root = path.root();
            if !root.is_empty() {
                out.push((root.to_string(), span));
            }
        }
    });
    out
}

fn collect_paths(expr: &Expr) -> Vec<&crate::expr::ContextPath> {
    let mut out = Vec::new();
    fn walk<'a>(expr: &'a Expr, out: &mut Vec<&'a crate::expr::ContextPath>) {
        match expr {
            Expr::Context(path) => {
                out.push(path);
                for seg in &path.segments {
                    if let PathSeg::Index(idx) = seg {
                        walk(idx, out);
                    }
                }
            }
            Expr::Index(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Expr::Not(inner) => walk(inner, out),
            Expr::Eq(a, b) | Expr::Ne(a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Expr::Call { args, .. } => {
                for arg in args {
                    walk(arg, out);
                }
            }
            _ => {}
        }
    }
    walk(expr, &mut out);
    out
}

/// Visit every parseable expression in conditions and run scripts. Bare
/// text is treated as an expression only for conditions; scripts are shell.
fn for_each_expression(doc: &WorkflowDoc, visit: &mut dyn FnMut(&Expr, SourceSpan)) {
    let scan_text = |text: &str,
                     span: SourceSpan,
                     bare_is_expression: bool,
                     visit: &mut dyn FnMut(&Expr, SourceSpan)| {
        let matches = scan_expressions(text);
        if matches.is_empty() {
            if bare_is_expression {
                if let Ok(ast) = parse_expression(text.trim()) {
                    visit(&ast, span);
                }
            }
            return;
        }
        for m in matches {
            if m.unterminated {
                continue;
            }
            if let Ok(ast) = parse_expression(&text[m.body_start..m.body_end]) {
                visit(&ast, span);
            }
        }
    };

    for job in doc.jobs.values() {
        if let Some(cond) = &job.condition {
            scan_text(&cond.text, cond.span, true, visit);
        }
        for step in &job.steps {
            if let Some(cond) = &step.condition {
                scan_text(&cond.text, cond.span, true, visit);
            }
            if let StepKind::Run { script_span, .. } = &step.kind {
                let slice = script_span.slice(&doc.source);
                scan_text(slice, *script_span, false, visit);
            }
        }
    }
}
