//! Injection Weakness: untrusted data reaching execution contexts.

use std::collections::HashSet;

use once_cell::sync::Lazy;
use regex::Regex;

use crate::catalog;
use crate::expr::{TaintPolicy, Trust};
use crate::finding::{Finding, Severity};
use crate::model::{EnvMap, PermissionMode, StepKind, WorkflowDoc};
use crate::profile::Profile;
use crate::span::SourceSpan;

use super::expressions_in_slice;

static ENV_FILE_SINK: Lazy<Regex> =
    Lazy::new(|| Regex::new(r#">>?\s*"?\$\{?GITHUB_(ENV|PATH)\}?"#).expect("valid regex"));

static DEPRECATED_COMMAND: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"::(set-env|add-path)\b").expect("valid regex"));

pub fn detect_iw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();
    let policy = TaintPolicy::with_extra_untrusted(&profile.extra_untrusted_contexts);

    // Environment names whose values carry untrusted expressions, per scope.
    let tainted_in = |env: &EnvMap, acc: &mut HashSet<String>| {
        for (name, entry) in env {
            let slice = entry.value_span.slice(&doc.source);
            let exprs = crate::expr::extract_with_policy(slice, entry.value_span, &policy);
            if exprs.iter().any(|e| e.trust == Trust::Untrusted) {
                acc.insert(name.clone());
            }
        }
    };
    let mut workflow_tainted = HashSet::new();
    tainted_in(&doc.env, &mut workflow_tainted);

    let workflow_has_run_steps = doc
        .jobs
        .values()
        .any(|j| j.steps.iter().any(|s| matches!(s.kind, StepKind::Run { .. })));

    // Untrusted expressions sitting in env values consumed by run steps.
    let env_value_findings = |env: &EnvMap, owner: &str, findings: &mut Vec<Finding>| {
        for (name, entry) in env {
            let slice = entry.value_span.slice(&doc.source);
            for expr in crate::expr::extract_with_policy(slice, entry.value_span, &policy) {
                if expr.trust == Trust::Untrusted {
                    findings.push(
                        catalog::rule("iw.untrusted-run")
                            .expect("catalog rule")
                            .finding(
                                expr.span,
                                format!(
                                    "untrusted expression `{}` flows into environment variable \
                                     `{name}` ({owner}) where run steps can expand it",
                                    expr.raw.trim()
                                ),
                            )
                            .build(),
                    );
                }
            }
        }
    };
    if workflow_has_run_steps {
        env_value_findings(&doc.env, "workflow env", &mut findings);
    }

    for job in doc.jobs.values() {
        let mut job_tainted = workflow_tainted.clone();
        tainted_in(&job.env, &mut job_tainted);
        let job_has_run = job.steps.iter().any(|s| matches!(s.kind, StepKind::Run { .. }));
        if job_has_run {
            env_value_findings(&job.env, &format!("job `{}` env", job.id), &mut findings);
        }

        let write_token = matches!(
            doc.effective_permissions(job),
            PermissionMode::WriteAll | PermissionMode::Scoped(_)
        ) && match doc.effective_permissions(job) {
            PermissionMode::Scoped(map) => map.values().any(|a| *a == crate::model::Access::Write),
            PermissionMode::WriteAll => true,
            _ => false,
        };

        for step in &job.steps {
            let mut step_tainted = job_tainted.clone();
            tainted_in(&step.env, &mut step_tainted);

            let StepKind::Run { script_span, .. } = &step.kind else {
                continue;
            };
            if !step.env.is_empty() {
                env_value_findings(&step.env, "step env", &mut findings);
            }

            let exprs = expressions_in_slice(doc, *script_span, &policy);
            for expr in &exprs {
                match expr.trust {
                    Trust::Untrusted => {
                        let severity = if write_token {
                            Severity::Critical
                        } else {
                            Severity::High
                        };
                        findings.push(
                            catalog::rule("iw.untrusted-run")
                                .expect("catalog rule")
                                .finding(
                                    expr.span,
                                    format!(
                                        "untrusted expression `{}` is expanded inside a run \
                                         script; shell metacharacters in it execute as commands",
                                        expr.raw.trim()
                                    ),
                                )
                                .severity(severity)
                                .build(),
                        );
                    }
                    Trust::Conditional => {
                        // env.X derived from untrusted values counts as untrusted.
                        let via_env = expr.contexts.iter().find_map(|c| {
                            let rest = c.strip_prefix("env.")?;
                            step_tainted.contains(rest).then(|| rest.to_string())
                        });
                        if let Some(var) = via_env {
                            findings.push(
                                catalog::rule("iw.untrusted-run")
                                    .expect("catalog rule")
                                    .finding(
                                        expr.span,
                                        format!(
                                            "`env.{var}` is derived from an untrusted expression \
                                             and is expanded inside a run script",
                                        ),
                                    )
                                    .build(),
                            );
                        } else if profile.iw.conditional_untrusted {
                            findings.push(
                                catalog::rule("iw.conditional-expression")
                                    .expect("catalog rule")
                                    .finding(
                                        expr.span,
                                        format!(
                                            "expression `{}` is neither provably repository- \
                                             controlled nor on the untrusted list; review before \
                                             expanding it in a shell",
                                            expr.raw.trim()
                                        ),
                                    )
                                    .build(),
                            );
                        }
                    }
                    Trust::Trusted => {}
                }
            }

            // Writes of expression-bearing lines to $GITHUB_ENV / $GITHUB_PATH.
            if profile.iw.env_path_sinks {
                let slice = script_span.slice(&doc.source);
                let mut offset = 0usize;
                for line in slice.split_inclusive('\n') {
                    let trimmed = line.trim_end_matches('\n');
                    if ENV_FILE_SINK.is_match(trimmed) && trimmed.contains("${{") {
                        let line_span = subspan(doc, *script_span, offset, trimmed.len());
                        let untrusted = exprs.iter().any(|e| {
                            e.trust == Trust::Untrusted && line_span.contains(&e.span)
                        });
                        let severity = if untrusted { Severity::High } else { Severity::Medium };
                        findings.push(
                            catalog::rule("iw.env-path-write")
                                .expect("catalog rule")
                                .finding(
                                    line_span,
                                    "expression-derived data is appended to a runner environment \
                                     file, shaping later steps' environment or PATH"
                                        .to_string(),
                                )
                                .severity(severity)
                                .build(),
                        );
                    }
                    offset += line.len();
                }
            }

            // Deprecated workflow commands inside the script.
            if profile.iw.deprecated_commands {
                let slice = script_span.slice(&doc.source);
                for m in DEPRECATED_COMMAND.find_iter(slice) {
                    let span = subspan(doc, *script_span, m.start(), m.end() - m.start());
                    findings.push(
                        catalog::rule("iw.deprecated-commands")
                            .expect("catalog rule")
                            .finding(
                                span,
                                format!(
                                    "deprecated workflow command `{}` lets step output rewrite \
                                     the environment of later steps",
                                    m.as_str()
                                ),
                            )
                            .build(),
                    );
                }
            }
        }

        if profile.iw.deprecated_commands {
            for (env, what) in [(&doc.env, "workflow"), (&job.env, "job")] {
                if let Some(entry) = env.get("ACTIONS_ALLOW_UNSECURE_COMMANDS") {
                    findings.push(
                        catalog::rule("iw.deprecated-commands")
                            .expect("catalog rule")
                            .finding(
                                entry.key_span,
                                format!(
                                    "{what} env re-enables the insecure workflow commands that \
                                     were disabled platform-wide"
                                ),
                            )
                            .build(),
                    );
                }
            }
        }
    }

    // Workflow-level ACTIONS_ALLOW_UNSECURE_COMMANDS dedup: the loop above
    // reports it once per job; keep the first occurrence per span.
    findings.sort_by_key(|f| (f.span.start_byte, f.span.end_byte));
    findings.dedup_by(|a, b| a.span == b.span && a.rule_id == b.rule_id && a.message == b.message);
    findings
}

fn subspan(doc: &WorkflowDoc, base: SourceSpan, offset: usize, len: usize) -> SourceSpan {
    let index = doc.line_index();
    index.span(
        &doc.source,
        base.start_byte + offset,
        base.start_byte + offset + len,
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
    fn untrusted_input_in_run_is_flagged() {
        let src = "on:\n  workflow_dispatch:\n    inputs:\n      run_id:\n        required: true\njobs:\n  retry:\n    runs-on: ubuntu-latest\n    steps:\n      - run: |\n          gh run watch ${{ inputs.run_id }} > /dev/null 2>&1\n          gh run rerun ${{ inputs.run_id }} --failed\n";
        let findings = detect_iw(&doc(src), &Profile::balanced());
        let untrusted: Vec<_> = findings
            .iter()
            .filter(|f| f.rule_id == "iw.untrusted-run")
            .collect();
        assert_eq!(untrusted.len(), 2);
        assert!(untrusted[0].message.contains("inputs.run_id"));
        // Spans land on the expression text itself.
        for f in &untrusted {
            assert!(f.span.slice(src).contains("inputs.run_id"));
        }
    }

    #[test]
    fn deprecated_command_is_flagged() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo \"::set-env name=F::1\"\n";
        let findings = detect_iw(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "iw.deprecated-commands");
        assert_eq!(findings[0].span.slice(src), "::set-env");
    }

    #[test]
    fn plain_script_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo hello\n";
        assert!(detect_iw(&doc(src), &Profile::balanced()).is_empty());
    }

    #[test]
    fn write_permissions_escalate_severity() {
        let src = "on: issues\npermissions:\n  contents: write\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo ${{ github.event.issue.title }}\n";
        let findings = detect_iw(&doc(src), &Profile::balanced());
        assert_eq!(findings[0].severity, Severity::Critical);
    }

    #[test]
    fn tainted_env_propagates_to_run() {
        let src = "on: pull_request_target\njobs:\n  a:\n    runs-on: x\n    env:\n      TITLE: ${{ github.event.pull_request.title }}\n    steps:\n      - run: echo ${{ env.TITLE }}\n";
        let findings = detect_iw(&doc(src), &Profile::balanced());
        // One for the tainted env value itself, one for its use in the script.
        assert_eq!(findings.len(), 2);
        assert!(findings.iter().any(|f| f.message.contains("env.TITLE")));
        assert!(findings.iter().all(|f| f.rule_id == "iw.untrusted-run"));
    }

    #[test]
    fn env_file_sink_flagged_when_enabled() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo \"SHA=${{ github.event.after }}\" >> $GITHUB_ENV\n";
        let conservative = detect_iw(&doc(src), &Profile::conservative());
        assert!(conservative.is_empty());
        let balanced = detect_iw(&doc(src), &Profile::balanced());
        assert_eq!(balanced.len(), 1);
        assert_eq!(balanced[0].rule_id, "iw.env-path-write");
    }

    #[test]
    fn conditional_contexts_only_under_permissive() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo ${{ github.actor }}\n";
        assert!(detect_iw(&doc(src), &Profile::balanced()).is_empty());
        let permissive = detect_iw(&doc(src), &Profile::permissive());
        assert_eq!(permissive.len(), 1);
        assert_eq!(permissive[0].rule_id, "iw.conditional-expression");
    }

    #[test]
    fn unsecure_commands_env_is_flagged() {
        let src = "on: push\nenv:\n  ACTIONS_ALLOW_UNSECURE_COMMANDS: \"true\"\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo hi\n";
        let findings = detect_iw(&doc(src), &Profile::conservative());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "iw.deprecated-commands");
    }
}
