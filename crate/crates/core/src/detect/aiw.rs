//! Artifact Integrity Weakness: unverified artifacts and untrusted code
//! entering the pipeline.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::catalog;
use crate::expr::TaintPolicy;
use crate::finding::{Confidence, Finding};
use crate::model::{Job, Step, StepKind, WorkflowDoc};
use crate::profile::Profile;

use super::{is_checkout_step, references_pr_head};

/// Commands accepted as integrity verification of previously fetched data.
static VERIFICATION: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"(sha\d+sum\b[^\n]*(\s-c\b|\s--check\b))|(shasum\b[^\n]*(\s-c\b|\s--check\b))|(gpg\b[^\n]*--verify)|(cosign\b[^\n]*\bverify)|(openssl\s+dgst\b[^\n]*-verify)",
    )
    .expect("valid regex")
});

fn is_artifact_download(step: &Step) -> bool {
    step.uses()
        .and_then(|u| u.action.repo.as_deref())
        .is_some_and(|repo| repo.contains("download-artifact"))
}

pub fn detect_aiw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    let policy = TaintPolicy::with_extra_untrusted(&profile.extra_untrusted_contexts);

    for job in doc.jobs.values() {
        if profile.aiw.require_checksum_after_download {
            for (index, step) in job.steps.iter().enumerate() {
                if !is_artifact_download(step) {
                    continue;
                }
                let verified_later = job.steps[index + 1..].iter().any(|later| {
                    later
                        .run_script()
                        .is_some_and(|(script, _)| VERIFICATION.is_match(script))
                });
                if !verified_later {
                    let span = step.uses().map(|u| u.span).unwrap_or(step.span);
                    findings.push(
                        catalog::rule("aiw.unverified-artifact")
                            .expect("catalog rule")
                            .finding(
                                span,
                                format!(
                                    "job `{}` downloads an artifact and never verifies a checksum \
                                     or signature before using it",
                                    job.id
                                ),
                            )
                            .build(),
                    );
                }
            }
        }

        findings.extend(untrusted_checkout_findings(doc, job, profile, &policy));
    }

    findings
}

fn untrusted_checkout_findings(
    doc: &WorkflowDoc,
    job: &Job,
    profile: &Profile,
    policy: &TaintPolicy,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    for (index, step) in job.steps.iter().enumerate() {
        if !is_checkout_step(step) {
            continue;
        }
        let Some(with) = step.with_map() else { continue };

        let mut untrusted: Option<(String, Confidence)> = None;
        for key in ["ref", "repository"] {
            if let Some(entry) = with.get(key) {
                let slice = entry.value_span.slice(&doc.source);
                if references_pr_head(slice, entry.value_span, policy) {
                    untrusted = Some((
                        format!("`{key}:` points at the externally-controlled head"),
                        Confidence::High,
                    ));
                    break;
                }
            }
        }
        if untrusted.is_none() {
            if let Some(entry) = with.get("repository") {
                if !entry.value.contains("${{") {
                    if let Some((owner, _)) = entry.value.split_once('/') {
                        let trusted = profile
                            .aiw
                            .trusted_owners
                            .iter()
                            .any(|t| t.eq_ignore_ascii_case(owner));
                        if !trusted {
                            untrusted = Some((
                                format!(
                                    "`repository: {}` is outside the trusted owners list",
                                    entry.value
                                ),
                                Confidence::Medium,
                            ));
                        }
                    }
                }
            }
        }

        let Some((why, confidence)) = untrusted else {
            continue;
        };
        let Some(run_after) = job.steps[index + 1..]
            .iter()
            .find(|later| matches!(later.kind, StepKind::Run { .. }))
        else {
            continue;
        };
        let span = step.uses().map(|u| u.span).unwrap_or(step.span);
        findings.push(
            catalog::rule("aiw.untrusted-checkout-run")
                .expect("catalog rule")
                .finding(
                    span,
                    format!(
                        "job `{}` checks out unreviewed code ({why}) and then executes build \
                         commands on it",
                        job.id
                    ),
                )
                .confidence(confidence)
                .related("code executed here", run_after.span)
                .build(),
        );
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_workflow;

    fn doc(src: &str) -> WorkflowDoc {
        parse_workflow(src.as_bytes(), "x.yml").unwrap().doc
    }

    #[test]
    fn unverified_download_is_flagged() {
        let src = "on: push\njobs:\n  stats:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/download-artifact@v4\n        if: ${{ steps.docs-change.outputs.DOCS_CHANGE == 'nope' }}\n        with:\n          name: next-swc-binary\n          path: packages/next-swc/native\n      - run: ./scripts/use-binary.sh\n";
        let findings = detect_aiw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "aiw.unverified-artifact");
        assert!(findings[0].span.slice(src).contains("download-artifact"));
    }

    #[test]
    fn later_checksum_step_clears_the_job() {
        let src = "on: push\njobs:\n  stats:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/download-artifact@v4\n        with:\n          name: dist\n      - run: sha256sum -c sums.txt\n";
        assert!(detect_aiw(&doc(src), &Profile::balanced()).is_empty());
    }

    #[test]
    fn job_without_downloads_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: make\n";
        assert!(detect_aiw(&doc(src), &Profile::balanced()).is_empty());
    }

    #[test]
    fn fork_head_checkout_followed_by_build() {
        let src = "on: pull_request_target\njobs:\n  bench:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n        with:\n          repository: ${{ github.event.pull_request.head.repo.full_name }}\n          ref: ${{ github.event.pull_request.head.ref }}\n      - run: npm ci && npm run bench\n";
        let findings = detect_aiw(&doc(src), &Profile::conservative());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "aiw.untrusted-checkout-run");
        assert_eq!(findings[0].confidence, Confidence::High);
        assert_eq!(findings[0].related.len(), 1);
    }

    #[test]
    fn literal_repo_outside_trusted_owners() {
        let src = "on: push\njobs:\n  vendor:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n        with:\n          repository: octocat/widget-factory\n      - run: make vendor\n";
        let findings = detect_aiw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].confidence, Confidence::Medium);

        // No build step afterwards, no finding.
        let fetch_only = "on: push\njobs:\n  vendor:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n        with:\n          repository: octocat/widget-factory\n";
        assert!(detect_aiw(&doc(fetch_only), &Profile::balanced()).is_empty());
    }
}
