//! The ten weakness detectors and the scan entry point.
//!
//! Detectors are pure functions of `(document, profile, services snapshot)`.
//! [`run_all`] executes every detector, converts internal failures into
//! scan-level diagnostics instead of aborting, and returns findings in a
//! deterministic order.

mod aiw;
mod cfw;
mod epw;
mod grcw;
mod hgw;
mod iw;
mod kvcw;
mod sew;
mod tmw;
mod udw;

pub use aiw::detect_aiw;
pub use cfw::detect_cfw;
pub use epw::detect_epw;
pub use grcw::detect_grcw;
pub use hgw::detect_hgw;
pub use iw::detect_iw;
pub use kvcw::detect_kvcw;
pub use sew::detect_sew;
pub use tmw::detect_tmw;
pub use udw::detect_udw;

use std::panic::AssertUnwindSafe;

use crate::advisory::AdvisorySource;
use crate::expr::{extract_with_policy, pattern_matches, TaintedExpr, TaintPolicy};
use crate::finding::{Finding, ScanDiagnostic};
use crate::model::{ParseReport, ParsedWorkflow, Step, WorkflowDoc};
use crate::pin::PinFixture;
use crate::profile::Profile;
use crate::span::SourceSpan;

/// Events whose payloads can be shaped by actors without write access.
pub const EXTERNALLY_TRIGGERABLE_EVENTS: &[&str] = &[
    "pull_request",
    "pull_request_target",
    "issue_comment",
    "issues",
    "fork",
    "workflow_run",
    "discussion_comment",
];

/// Triggers that run with base-repository privileges against events an
/// external contributor can cause.
pub const PRIVILEGED_TRIGGERS: &[&str] = &["pull_request_target", "workflow_run"];

/// Context patterns identifying the head of an incoming PR or triggering run.
pub const PR_HEAD_CONTEXTS: &[&str] = &[
    "github.event.pull_request.head.*",
    "github.head_ref",
    "github.event.workflow_run.head_branch",
    "github.event.workflow_run.head_sha",
    "github.event.workflow_run.head_repository.*",
];

pub fn is_externally_triggerable(doc: &WorkflowDoc) -> bool {
    doc.triggers
        .iter()
        .any(|t| EXTERNALLY_TRIGGERABLE_EVENTS.contains(&t.event.as_str()))
}

pub(crate) fn references_pr_head(text: &str, base: SourceSpan, policy: &TaintPolicy) -> bool {
    extract_with_policy(text, base, policy).iter().any(|expr| {
        expr.contexts
            .iter()
            .any(|c| PR_HEAD_CONTEXTS.iter().any(|p| pattern_matches(p, c)))
    })
}

/// Expressions in the verbatim source slice of a node, with byte-accurate
/// spans.
pub(crate) fn expressions_in_slice(
    doc: &WorkflowDoc,
    span: SourceSpan,
    policy: &TaintPolicy,
) -> Vec<TaintedExpr> {
    let slice = span.slice(&doc.source);
    extract_with_policy(slice, span, policy)
}

pub(crate) fn is_checkout_step(step: &Step) -> bool {
    step.uses()
        .map(|u| u.action.repo.as_deref() == Some("checkout"))
        .unwrap_or(false)
}

/// External data available to detectors. Offline scans carry fixture-backed
/// sources only; no detector path may touch the network when `offline`.
pub struct Services<'a> {
    pub advisories: &'a dyn AdvisorySource,
    pub pin_fixture: Option<&'a PinFixture>,
    pub offline: bool,
}

impl<'a> Services<'a> {
    pub fn offline(advisories: &'a dyn AdvisorySource, pin_fixture: Option<&'a PinFixture>) -> Self {
        Services {
            advisories,
            pin_fixture,
            offline: true,
        }
    }
}

#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<ScanDiagnostic>,
}

/// Run all ten detectors over one document.
///
/// Findings are ordered by `(start_byte, rule_id)`; identical inputs produce
/// identical output. A detector failure becomes a diagnostic, never a crash.
pub fn run_all(
    doc: &WorkflowDoc,
    report: &ParseReport,
    profile: &Profile,
    services: &Services<'_>,
) -> ScanOutcome {
    let mut outcome = ScanOutcome::default();

    let mut run = |name: &str, body: &mut dyn FnMut() -> Vec<Finding>| {
        match std::panic::catch_unwind(AssertUnwindSafe(body)) {
            Ok(findings) => outcome.findings.extend(findings),
            Err(panic) => {
                let message = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "detector panicked".to_string());
                outcome.diagnostics.push(ScanDiagnostic {
                    detector: name.to_string(),
                    message,
                });
            }
        }
    };

    run("udw", &mut || detect_udw(doc, profile));
    run("tmw", &mut || detect_tmw(doc, profile));
    run("iw", &mut || detect_iw(doc, profile));
    run("sew", &mut || detect_sew(doc, profile));
    run("epw", &mut || detect_epw(doc, profile));
    run("cfw", &mut || detect_cfw(doc, profile));
    run("grcw", &mut || detect_grcw(doc, report, profile));
    run("hgw", &mut || detect_hgw(doc, profile));
    run("aiw", &mut || detect_aiw(doc, profile));

    let (kvcw_findings, kvcw_diags) = detect_kvcw(doc, services, profile);
    outcome.findings.extend(kvcw_findings);
    outcome.diagnostics.extend(kvcw_diags);

    outcome
        .findings
        .sort_by(|a, b| (a.span.start_byte, &a.rule_id).cmp(&(b.span.start_byte, &b.rule_id)));
    outcome
}

/// Convenience wrapper over [`run_all`] for a parsed workflow.
pub fn scan_workflow(
    parsed: &ParsedWorkflow,
    profile: &Profile,
    services: &Services<'_>,
) -> ScanOutcome {
    run_all(&parsed.doc, &parsed.report, profile, services)
}
