//! Unpinned Dependency Weakness: `uses:` targets that float with history.

use crate::catalog;
use crate::finding::{Finding, Severity};
use crate::model::{list_action_refs, ActionRef, RefKind, WorkflowDoc};
use crate::profile::Profile;
use crate::span::SourceSpan;

pub fn detect_udw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    let reusable_spans: Vec<SourceSpan> = doc
        .jobs
        .values()
        .filter_map(|j| j.reusable_call.as_ref().map(|c| c.span))
        .collect();

    for (action, span) in list_action_refs(doc, profile.udw.include_commented) {
        let is_reusable = reusable_spans.contains(&span);
        match action.ref_kind {
            RefKind::Sha | RefKind::Local => continue,
            RefKind::Docker => {
                if action.commented_out || action.is_digest_pinned() {
                    continue;
                }
                if !profile.udw.include_docker_refs {
                    continue;
                }
                findings.push(
                    catalog::rule("udw.unpinned-docker")
                        .expect("catalog rule")
                        .finding(
                            span,
                            format!(
                                "docker action `{}` is not pinned to an image digest; tags are \
                                 re-resolved on every run",
                                action.raw
                            ),
                        )
                        .build(),
                );
            }
            RefKind::Tag | RefKind::Branch | RefKind::Unknown => {
                if is_exempt(&action, profile) {
                    continue;
                }
                if action.commented_out {
                    findings.push(
                        catalog::rule("udw.commented-uses")
                            .expect("catalog rule")
                            .finding(
                                span,
                                format!(
                                    "commented-out reference `{}` uses a mutable ref and would \
                                     come back unpinned if re-enabled",
                                    action.raw
                                ),
                            )
                            .build(),
                    );
                    continue;
                }
                if is_reusable && !profile.udw.include_reusable_workflows {
                    continue;
                }
                let rule = if is_reusable {
                    "udw.unpinned-reusable"
                } else {
                    "udw.unpinned-uses"
                };
                let severity = if action
                    .owner
                    .as_deref()
                    .is_some_and(|o| profile.official_owners.iter().any(|p| p == o))
                {
                    Severity::Low
                } else {
                    Severity::Medium
                };
                findings.push(
                    catalog::rule(rule)
                        .expect("catalog rule")
                        .finding(span, describe(&action))
                        .severity(severity)
                        .build(),
                );
            }
        }
    }
    findings
}

fn is_exempt(action: &ActionRef, profile: &Profile) -> bool {
    if profile.udw.official_exempt
        && action
            .owner
            .as_deref()
            .is_some_and(|o| profile.official_owners.iter().any(|p| p == o))
    {
        return true;
    }
    if profile.udw.skip_default_branch_refs
        && matches!(action.ref_name.as_deref(), Some("main") | Some("master"))
    {
        return true;
    }
    false
}

fn describe(action: &ActionRef) -> String {
    match (action.ref_kind, action.ref_name.as_deref()) {
        (RefKind::Tag, Some(r)) => format!(
            "`{}` is pinned to tag `{r}`, which the upstream repository can move; pin the \
             full commit SHA instead",
            action.raw
        ),
        (RefKind::Branch, Some(r)) => format!(
            "`{}` tracks branch `{r}` and re-fetches its tip on every run; pin the full \
             commit SHA instead",
            action.raw
        ),
        (_, Some(r)) => format!(
            "`{}` uses ref `{r}`, which is not an immutable commit SHA",
            action.raw
        ),
        (_, None) => format!("`{}` has no ref and floats with the default branch", action.raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finding::Weakness;
    use crate::model::parse_workflow;

    fn doc(src: &str) -> WorkflowDoc {
        parse_workflow(src.as_bytes(), "x.yml").unwrap().doc
    }

    const FIG1: &str = "on:\n  pull_request:\n    branches: [master]\njobs:\n  size:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v3\n      - uses: andresz1/size-limit-action@v1\n";

    #[test]
    fn floating_branch_is_flagged_under_balanced() {
        let src = "on: push\njobs:\n  upload:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: freecodecamp/crowdin-action@main\n";
        let findings = detect_udw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].weakness, Weakness::Udw);
        assert_eq!(findings[0].rule_id, "udw.unpinned-uses");
    }

    #[test]
    fn sha_pinned_ref_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - uses: actions/checkout@f43a0e5ff2bd294095638e18286ca9a3d1956744\n";
        assert!(detect_udw(&doc(src), &Profile::permissive()).is_empty());
    }

    #[test]
    fn profile_exemptions_shrink_findings() {
        let d = doc(FIG1);
        let permissive = detect_udw(&d, &Profile::permissive());
        assert_eq!(permissive.len(), 2);
        let conservative = detect_udw(&d, &Profile::conservative());
        assert_eq!(conservative.len(), 1);
        assert!(conservative[0].message.contains("size-limit-action"));
    }

    #[test]
    fn conservative_skips_default_branch_refs() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - uses: foo/bar@main\n      - uses: foo/baz@v1\n";
        let findings = detect_udw(&doc(src), &Profile::conservative());
        assert_eq!(findings.len(), 1);
        assert!(findings[0].message.contains("foo/baz"));
    }

    #[test]
    fn docker_and_commented_refs_follow_profile_switches() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      # - uses: old/action@v1\n      - uses: docker://alpine:3.19\n      - run: echo hi\n";
        let d = doc(src);
        let conservative = detect_udw(&d, &Profile::conservative());
        assert!(conservative.is_empty());
        let balanced = detect_udw(&d, &Profile::balanced());
        assert_eq!(balanced.len(), 1);
        assert_eq!(balanced[0].rule_id, "udw.unpinned-docker");
        let permissive = detect_udw(&d, &Profile::permissive());
        assert_eq!(permissive.len(), 2);
        assert!(permissive.iter().any(|f| f.rule_id == "udw.commented-uses"));
    }

    #[test]
    fn digest_pinned_docker_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - uses: docker://alpine@sha256:1304f174557314a7ed9eddb4eab12fed12cb0cd9809e4c28f29af86979a3c870\n";
        assert!(detect_udw(&doc(src), &Profile::permissive()).is_empty());
    }

    #[test]
    fn reusable_calls_gated_by_profile() {
        let src = "on: push\njobs:\n  build:\n    uses: octo-org/ci/.github/workflows/build.yml@v2\n";
        let d = doc(src);
        assert!(detect_udw(&d, &Profile::conservative()).is_empty());
        let balanced = detect_udw(&d, &Profile::balanced());
        assert_eq!(balanced.len(), 1);
        assert_eq!(balanced[0].rule_id, "udw.unpinned-reusable");
    }
}
