//! Secrets Exposure Weakness: unsafe secret propagation and hardcoded
//! credentials.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::catalog;
use crate::expr::scan_expressions;
use crate::finding::{Confidence, Finding, Severity};
use crate::model::{RefKind, SecretsMode, StepKind, WorkflowDoc};
use crate::profile::Profile;
use crate::secrets::SecretScanner;
use crate::span::SourceSpan;

static SECRET_TO_ENV_FILE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r#">>?\s*"?\$\{?GITHUB_(ENV|OUTPUT)\}?"#).expect("valid regex"));

pub fn detect_sew(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    let mut findings = Vec::new();

    for job in doc.jobs.values() {
        // Blanket pass-through of all secrets to a reusable workflow.
        if profile.sew.inherit_is_finding {
            if let (SecretsMode::Inherit { span }, Some(call)) =
                (&job.secrets_mode, job.reusable_call.as_ref())
            {
                let external = call.action.ref_kind != RefKind::Local;
                let severity = if external { Severity::High } else { Severity::Medium };
                findings.push(
                    catalog::rule("sew.secrets-inherit")
                        .expect("catalog rule")
                        .finding(
                            *span,
                            format!(
                                "job `{}` passes every repository secret to `{}` via \
                                 `secrets: inherit`; pass only the secrets the callee needs",
                                job.id, call.action.raw
                            ),
                        )
                        .severity(severity)
                        .related("reusable workflow call", call.span)
                        .build(),
                );
            }
        }

        // Secret expansions redirected into runner environment files.
        if profile.sew.env_file_write_is_finding {
            for step in &job.steps {
                let StepKind::Run { script_span, .. } = &step.kind else {
                    continue;
                };
                let slice = script_span.slice(&doc.source);
                let mut offset = 0usize;
                for line in slice.split_inclusive('\n') {
                    let trimmed = line.trim_end_matches('\n');
                    if trimmed.contains("secrets.") && SECRET_TO_ENV_FILE.is_match(trimmed) {
                        let references_secret = scan_expressions(trimmed)
                            .iter()
                            .any(|m| trimmed[m.body_start..m.body_end].contains("secrets."));
                        if references_secret {
                            let span = line_span(doc, *script_span, offset, trimmed.len());
                            findings.push(
                                catalog::rule("sew.secret-env-write")
                                    .expect("catalog rule")
                                    .finding(
                                        span,
                                        "a secret is written to a runner environment file, where \
                                         masking no longer protects it and later steps can read it"
                                            .to_string(),
                                    )
                                    .build(),
                            );
                        }
                    }
                    offset += line.len();
                }
            }
        }

        // Credentials and secret expansions in container/services blocks.
        if profile.sew.container_credentials {
            let mut containers: Vec<(&str, &crate::model::ContainerSpec)> = Vec::new();
            if let Some(c) = &job.container {
                containers.push(("container", c));
            }
            for (name, spec) in &job.services {
                containers.push((name.as_str(), spec));
            }
            for (what, spec) in containers {
                let mut reported = Vec::new();
                for (field, entry) in &spec.credentials {
                    if field != "password" {
                        continue;
                    }
                    let (message, confidence) = if entry.value.contains("${{") {
                        (
                            format!(
                                "registry credentials for `{what}` expand a secret inside the \
                                 job definition, widening where it travels"
                            ),
                            Confidence::Medium,
                        )
                    } else {
                        (
                            format!("registry password for `{what}` is hardcoded in the workflow"),
                            Confidence::High,
                        )
                    };
                    reported.push(entry.value_span);
                    findings.push(
                        catalog::rule("sew.container-credentials")
                            .expect("catalog rule")
                            .finding(entry.value_span, message)
                            .confidence(confidence)
                            .build(),
                    );
                }
                // Secret expansions anywhere else in the container block.
                for scalar in spec.raw.walk_scalars() {
                    if reported.iter().any(|s| s.overlaps(&scalar.span)) {
                        continue;
                    }
                    let text = scalar.span.slice(&doc.source);
                    let mentions_secret = scan_expressions(text)
                        .iter()
                        .any(|m| text[m.body_start..m.body_end].contains("secrets."));
                    if mentions_secret {
                        findings.push(
                            catalog::rule("sew.container-credentials")
                                .expect("catalog rule")
                                .finding(
                                    scalar.span,
                                    format!("secret expanded inside the `{what}` definition"),
                                )
                                .build(),
                        );
                    }
                }
            }
        }
    }

    // Hardcoded-secret candidates from the secret scanner.
    let scanner = SecretScanner::new(
        profile.secrets.entropy_threshold,
        profile.secrets.min_token_length,
    );
    for candidate in scanner.detect_candidate_secrets(doc) {
        let confidence = if candidate.matched_pattern.is_some() {
            Confidence::High
        } else {
            Confidence::Medium
        };
        let message = match (&candidate.matched_pattern, &candidate.assigned_name) {
            (Some(pattern), _) => format!(
                "value matches the `{pattern}` credential shape; move it to the secret store"
            ),
            (None, Some(name)) => format!(
                "high-entropy value ({:.2} bits/char) assigned to `{name}`; move it to the \
                 secret store",
                candidate.entropy_bits_per_char
            ),
            (None, None) => "high-entropy secret-like value in workflow".to_string(),
        };
        findings.push(
            catalog::rule("sew.hardcoded-secret")
                .expect("catalog rule")
                .finding(candidate.span, message)
                .confidence(confidence)
                .build(),
        );
    }

    findings
}

fn line_span(doc: &WorkflowDoc, base: SourceSpan, offset: usize, len: usize) -> SourceSpan {
    doc.line_index().span(
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
    fn secrets_inherit_on_reusable_call() {
        let src = "on: push\njobs:\n  build:\n    uses: ./.github/workflows/build_reusable.yml\n    secrets: inherit\n";
        let findings = detect_sew(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "sew.secrets-inherit");
        assert_eq!(findings[0].span.slice(src), "inherit");
        // Local callee stays at medium; an external one is high.
        assert_eq!(findings[0].severity, Severity::Medium);

        let external = "on: push\njobs:\n  build:\n    uses: octo/ci/.github/workflows/b.yml@v1\n    secrets: inherit\n";
        let findings = detect_sew(&doc(external), &Profile::balanced());
        assert_eq!(findings[0].severity, Severity::High);
    }

    #[test]
    fn secret_written_to_env_file() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo \"T=${{ secrets.API }}\" >> $GITHUB_ENV\n";
        let findings = detect_sew(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "sew.secret-env-write");
        // Disabled in the conservative profile.
        assert!(detect_sew(&doc(src), &Profile::conservative()).is_empty());
    }

    #[test]
    fn workflow_without_secrets_is_clean() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo ok\n";
        assert!(detect_sew(&doc(src), &Profile::balanced()).is_empty());
    }

    #[test]
    fn container_credentials_are_flagged() {
        let src = "on: push\njobs:\n  a:\n    runs-on: x\n    container:\n      image: private.example/img:1\n      credentials:\n        username: ci\n        password: ${{ secrets.REGISTRY_TOKEN }}\n    steps:\n      - run: make\n";
        let findings = detect_sew(&doc(src), &Profile::balanced());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "sew.container-credentials");
        assert_eq!(findings[0].confidence, Confidence::Medium);
    }

    #[test]
    fn hardcoded_secret_via_scanner() {
        let token = format!("ghp_{}", "Ab3dEf6hIj9kLm2nOp5qRs8tUv1wXy4zAb3d");
        let src = format!(
            "on: push\njobs:\n  a:\n    runs-on: x\n    env:\n      MY_TOKEN: \"{token}\"\n    steps:\n      - run: echo hi\n"
        );
        let findings = detect_sew(&doc(&src), &Profile::conservative());
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "sew.hardcoded-secret");
        assert_eq!(findings[0].confidence, Confidence::High);
    }
}
