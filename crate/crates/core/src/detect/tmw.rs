//! Trigger Misuse Weakness: privileged triggers and exposed runners.

use crate::catalog;
use crate::expr::TaintPolicy;
use crate::finding::Finding;
use crate::model::WorkflowDoc;
use crate::profile::Profile;

use super::{
    is_checkout_step, is_externally_triggerable, references_pr_head, PRIVILEGED_TRIGGERS,
};

pub fn detect_tmw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    let policy = TaintPolicy::with_extra_untrusted(&profile.extra_untrusted_contexts);

    let privileged: Vec<_> = doc
        .triggers
        .iter()
        .filter(|t| PRIVILEGED_TRIGGERS.contains(&t.event.as_str()))
        .collect();

    for trigger in &privileged {
        if profile.rule_enabled("tmw.pull-request-target") {
            findings.push(
                catalog::rule("tmw.pull-request-target")
                    .expect("catalog rule")
                    .finding(
                        trigger.span,
                        format!(
                            "`{}` runs in the base repository context with secrets and a write \
                             token while the triggering event is externally controlled",
                            trigger.event
                        ),
                    )
                    .build(),
            );
        }
    }

    // Strict sub-rule: privileged trigger combined with a checkout that
    // fetches the attacker-controlled head.
    if let Some(trigger) = privileged.first() {
        for job in doc.jobs.values() {
            for step in &job.steps {
                if !is_checkout_step(step) {
                    continue;
                }
                let fetches_head = step.with_map().is_some_and(|with| {
                    ["ref", "repository"].iter().any(|key| {
                        with.get(*key).is_some_and(|entry| {
                            let slice = entry.value_span.slice(&doc.source);
                            references_pr_head(slice, entry.value_span, &policy)
                        })
                    })
                });
                if fetches_head {
                    let span = step.uses().map(|u| u.span).unwrap_or(step.span);
                    findings.push(
                        catalog::rule("tmw.prt-unsafe-checkout")
                            .expect("catalog rule")
                            .finding(
                                span,
                                format!(
                                    "job `{}` checks out the externally-controlled head under a \
                                     `{}` trigger, so fork code runs with repository privileges",
                                    job.id, trigger.event
                                ),
                            )
                            .related("privileged trigger", trigger.span)
                            .build(),
                    );
                }
            }
        }
    }

    if profile.tmw.flag_self_hosted && is_externally_triggerable(doc) {
        for job in doc.jobs.values() {
            for label in &job.runs_on {
                if label.label == "self-hosted" {
                    findings.push(
                        catalog::rule("tmw.self-hosted-runner")
                            .expect("catalog rule")
                            .finding(
                                label.span,
                                format!(
                                    "job `{}` runs on a self-hosted runner while the workflow is \
                                     triggerable by external events",
                                    job.id
                                ),
                            )
                            .build(),
                    );
                }
            }
        }
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
    fn pull_request_target_trigger_is_flagged() {
        let src = "on:\n  pull_request_target:\n    types: [labeled]\njobs:\n  label:\n    runs-on: ubuntu-latest\n    steps:\n      - run: echo ok\n";
        let findings = detect_tmw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "tmw.pull-request-target");
        assert_eq!(findings[0].span.start_line, 2);
    }

    #[test]
    fn push_only_workflow_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo ok\n";
        assert!(detect_tmw(&doc(src), &Profile::balanced()).is_empty());
    }

    #[test]
    fn strict_subrule_needs_the_checkout() {
        let src = "on: pull_request_target\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n        with:\n          ref: ${{ github.event.pull_request.head.sha }}\n      - run: make\n";
        let d = doc(src);
        // Conservative only reports the strict combination, with both spans.
        let conservative = detect_tmw(&d, &Profile::conservative());
        assert_eq!(conservative.len(), 1);
        assert_eq!(conservative[0].rule_id, "tmw.prt-unsafe-checkout");
        assert_eq!(conservative[0].related.len(), 1);
        assert!(conservative[0].related[0].span.start_line <= 1);

        // Without the unsafe checkout, conservative stays quiet.
        let safe = "on: pull_request_target\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - run: echo ok\n";
        assert!(detect_tmw(&doc(safe), &Profile::conservative()).is_empty());
    }

    #[test]
    fn self_hosted_runner_flagged_when_exposed() {
        let src = "on: pull_request\njobs:\n  build:\n    runs-on: [self-hosted, linux]\n    steps:\n      - run: make\n";
        let findings = detect_tmw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "tmw.self-hosted-runner");

        // Not flagged when only push can trigger it.
        let internal = "on: push\njobs:\n  build:\n    runs-on: [self-hosted]\n    steps:\n      - run: make\n";
        assert!(detect_tmw(&doc(internal), &Profile::balanced()).is_empty());
    }
}
