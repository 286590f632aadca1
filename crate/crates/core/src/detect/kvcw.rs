//! Known Vulnerable Component Weakness: action versions with published
//! advisories.

use crate::advisory::{lookup_advisories, parse_version};
use crate::catalog;
use crate::finding::{Confidence, Finding, ScanDiagnostic};
use crate::model::{list_action_refs, ActionRef, RefKind, WorkflowDoc};
use crate::profile::Profile;

use super::Services;

pub fn detect_kvcw(
    doc: &WorkflowDoc,
    services: &Services<'_>,
    profile: &Profile,
) -> (Vec<Finding>, Vec<ScanDiagnostic>) {
    let mut findings = Vec::new();
    let mut diagnostics = Vec::new();
    if !profile.kvcw.enabled {
        return (findings, diagnostics);
    }
    if !services.advisories.has_data() {
        diagnostics.push(ScanDiagnostic {
            detector: "kvcw".to_string(),
            message: "advisory source is empty; known-vulnerability checks report nothing"
                .to_string(),
        });
        return (findings, diagnostics);
    }

    for (action, span) in list_action_refs(doc, false) {
        if action.slug().is_none() || matches!(action.ref_kind, RefKind::Local | RefKind::Docker) {
            continue;
        }

        // Sha-pinned refs are versioned through the pin fixture's reverse
        // mapping when available; otherwise they stay unresolvable.
        let query: Option<ActionRef> = match action.ref_kind {
            RefKind::Sha => services.pin_fixture.and_then(|fixture| {
                let slug = action.slug().expect("slug checked above");
                let sha = action.ref_name.as_deref().expect("sha refs carry a ref");
                fixture.ref_for_sha(&slug, sha).map(|tag| {
                    ActionRef::parse(&format!("{slug}@{tag}"))
                })
            }),
            _ => Some(action.clone()),
        };

        let resolvable = query
            .as_ref()
            .and_then(|q| q.ref_name.as_deref())
            .and_then(parse_version)
            .is_some();

        if !resolvable {
            if profile.kvcw.informational_unresolvable {
                findings.push(
                    catalog::rule("kvcw.unresolvable-version")
                        .expect("catalog rule")
                        .finding(
                            span,
                            format!(
                                "`{}` has no resolvable version, so advisory matching cannot \
                                 cover it",
                                action.raw
                            ),
                        )
                        .build(),
                );
            }
            continue;
        }
        let query = query.expect("resolvable implies query");

        match lookup_advisories(&query, services.advisories) {
            Ok(matches) => {
                for hit in matches {
                    let confidence = if hit.exact {
                        Confidence::High
                    } else {
                        Confidence::Medium
                    };
                    let fixed = hit.advisory.ranges.iter().find_map(|r| r.fixed.as_ref());
                    let fix_hint = match fixed {
                        Some(v) => format!("; fixed in {v}"),
                        None => String::new(),
                    };
                    let precision = if hit.exact {
                        String::new()
                    } else {
                        format!(
                            " (coarse version `{}`; every affected release shares this major)",
                            query.ref_name.as_deref().unwrap_or_default()
                        )
                    };
                    findings.push(
                        catalog::rule("kvcw.known-vulnerable")
                            .expect("catalog rule")
                            .finding(
                                span,
                                format!(
                                    "`{}` matches advisory {}: {}{fix_hint}{precision}",
                                    action.raw, hit.advisory.id, hit.advisory.summary
                                ),
                            )
                            .severity(hit.advisory.severity)
                            .confidence(confidence)
                            .build(),
                    );
                }
            }
            Err(err) => {
                diagnostics.push(ScanDiagnostic {
                    detector: "kvcw".to_string(),
                    message: format!("advisory lookup for `{}` failed: {err}", action.raw),
                });
            }
        }
    }

    (findings, diagnostics)
}
