//! Control Flow Weakness: conditions that never gate anything.

use crate::catalog;
use crate::expr::{evaluate_condition, is_forced_run_condition, Truthiness};
use crate::finding::Finding;
use crate::model::{RawCondition, WorkflowDoc};
use crate::profile::Profile;

pub fn detect_cfw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    for job in doc.jobs.values() {
        if let Some(cond) = &job.condition {
            check(cond, &format!("job `{}`", job.id), profile, &mut findings);
        }
        for step in &job.steps {
            if let Some(cond) = &step.condition {
                check(
                    cond,
                    &format!("step {} of job `{}`", step.index + 1, job.id),
                    profile,
                    &mut findings,
                );
            }
        }
    }
    findings
}

fn check(cond: &RawCondition, owner: &str, profile: &Profile, findings: &mut Vec<Finding>) {
    // `always()` is semantically always-true but intentional; report it as
    // its own low-severity sub-rule instead of an always-true defect.
    if is_forced_run_condition(cond) {
        if profile.cfw.forced_run_subrule {
            findings.push(
                catalog::rule("cfw.forced-run")
                    .expect("catalog rule")
                    .finding(
                        cond.span,
                        format!(
                            "{owner} uses `always()`, so it runs even after failures or \
                             cancellation"
                        ),
                    )
                    .build(),
            );
        }
        return;
    }
    let verdict = evaluate_condition(cond);
    if verdict.value == Truthiness::AlwaysTrue {
        findings.push(
            catalog::rule("cfw.always-true-condition")
                .expect("catalog rule")
                .finding(
                    cond.span,
                    format!("the condition on {owner} is always true: {}", verdict.reason),
                )
                .build(),
        );
    }
}
