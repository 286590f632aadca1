//! Excessive Permission Weakness: broad or undeclared token scopes.

use crate::catalog;
use crate::finding::{Finding, Severity};
use crate::model::{PermissionMode, PermissionSet, WorkflowDoc};
use crate::profile::Profile;

use super::is_externally_triggerable;

pub fn detect_epw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    let exposed = is_externally_triggerable(doc);
    if profile.epw.externally_triggerable_only && !exposed {
        return findings;
    }

    if let Some(perms) = &doc.permissions {
        if let Some(finding) = write_scope_finding(perms, "workflow", exposed) {
            findings.push(finding);
        }
    }

    if profile.epw.job_level {
        for job in doc.jobs.values() {
            if let Some(perms) = &job.permissions {
                if let Some(finding) =
                    write_scope_finding(perms, &format!("job `{}`", job.id), exposed)
                {
                    findings.push(finding);
                }
            }
        }
    }

    if profile.epw.flag_missing_top_level
        && doc.permissions.is_none()
        && !doc.jobs.is_empty()
        && doc.jobs.values().any(|j| j.permissions.is_none())
    {
        let span = doc.jobs_key_span.unwrap_or(doc.span);
        findings.push(
            catalog::rule("epw.missing-permissions")
                .expect("catalog rule")
                .finding(
                    span,
                    "no `permissions:` block is declared, so the token falls back to the \
                     repository default instead of an explicit least-privilege grant"
                        .to_string(),
                )
                .build(),
        );
    }

    findings
}

fn write_scope_finding(perms: &PermissionSet, owner: &str, exposed: bool) -> Option<Finding> {
    let scopes = perms.write_scopes();
    if scopes.is_empty() {
        return None;
    }
    let mut severity = match &perms.mode {
        PermissionMode::WriteAll => Severity::High,
        _ if scopes.len() >= 2 => Severity::High,
        _ => Severity::Medium,
    };
    if exposed {
        severity = match severity {
            Severity::Medium => Severity::High,
            Severity::High | Severity::Critical => Severity::Critical,
            Severity::Low => Severity::Medium,
        };
    }
    let message = if matches!(perms.mode, PermissionMode::WriteAll) {
        format!("{owner} grants `write-all`; a compromised step can rewrite the repository")
    } else {
        format!(
            "{owner} grants write access to {}; scope the token down to what the job needs",
            scopes
                .iter()
                .map(|s| format!("`{s}`"))
                .collect::<Vec<_>>()
                .join(", ")
        )
    };
    Some(
        catalog::rule("epw.write-scopes")
            .expect("catalog rule")
            .finding(perms.span, message)
            .severity(severity)
            .build(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_workflow;

    fn doc(src: &str) -> WorkflowDoc {
        parse_workflow(src.as_bytes(), "x.yml").unwrap().doc
    }

    #[test]
    fn write_scopes_are_listed_in_the_message() {
        let src = "on: push\npermissions:\n  contents: write\n  pull-requests: write\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo\n";
        let findings = detect_epw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert!(findings[0].message.contains("`contents`"));
        assert!(findings[0].message.contains("`pull-requests`"));
        assert_eq!(findings[0].severity, Severity::High);
    }

    #[test]
    fn explicit_read_is_clean() {
        let src = "on: push\npermissions:\n  contents: read\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo\n";
        assert!(detect_epw(&doc(src), &Profile::permissive()).is_empty());
    }

    #[test]
    fn missing_permissions_gated_by_profile() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo\n";
        assert!(detect_epw(&doc(src), &Profile::balanced()).is_empty());
        let findings = detect_epw(&doc(src), &Profile::permissive());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "epw.missing-permissions");
    }

    #[test]
    fn conservative_fires_only_on_exposed_workflows() {
        let push_only = "on: push\npermissions: write-all\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo\n";
        assert!(detect_epw(&doc(push_only), &Profile::conservative()).is_empty());

        let exposed = "on: pull_request_target\npermissions: write-all\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo\n";
        let findings = detect_epw(&doc(exposed), &Profile::conservative());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].severity, Severity::Critical);
    }

    #[test]
    fn job_level_writes_need_job_level_enabled() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    permissions:\n      contents: write\n    steps:\n      - run: echo\n";
        assert!(detect_epw(&doc(src), &Profile::conservative()).is_empty());
        let findings = detect_epw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert!(findings[0].message.contains("job `a`"));
    }
}
