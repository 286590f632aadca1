//! The rule catalog: every rule id, its weakness class, CWE mapping, and
//! default severity/confidence.
//!
//! Each rule belongs to exactly one weakness class. The catalog is the
//! authority for `rule id -> weakness` mapping; detectors construct findings
//! through it so the two can never drift apart.

use serde::Serialize;

use crate::finding::{Confidence, Finding, RelatedSpan, Severity, Weakness};
use crate::pin::TextEdit;
use crate::profile::Profile;
use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RuleMeta {
    pub id: &'static str,
    pub weakness: Weakness,
    pub cwe: &'static [&'static str],
    pub default_severity: Severity,
    pub default_confidence: Confidence,
    pub summary: &'static str,
    /// Why this pattern is a security problem; shown by `explain`.
    pub rationale: &'static str,
}

macro_rules! rules {
    ($($id:literal, $weakness:ident, [$($cwe:literal),+], $sev:ident, $conf:ident, $summary:literal, $rationale:literal;)+) => {
        pub const RULES: &[RuleMeta] = &[
            $(RuleMeta {
                id: $id,
                weakness: Weakness::$weakness,
                cwe: &[$($cwe),+],
                default_severity: Severity::$sev,
                default_confidence: Confidence::$conf,
                summary: $summary,
                rationale: $rationale,
            }),+
        ];
    };
}

rules! {
    "udw.unpinned-uses", Udw, ["CWE-829"], Medium, High,
        "step action pinned to a mutable tag or branch",
        "A `uses:` reference resolved through a floating tag or branch re-fetches whatever \
         commit the ref points at. Anyone who can move the ref (maintainer compromise, \
         repo takeover) silently injects code into every consuming workflow. Pinning to a \
         full commit SHA makes the reference immutable.";
    "udw.unpinned-reusable", Udw, ["CWE-829"], Medium, High,
        "reusable workflow called via a mutable ref",
        "Reusable workflows invoked with `jobs.<id>.uses:` run with the caller's secrets \
         available. Calling them through a floating ref hands that trust to whoever \
         controls the ref in the future.";
    "udw.unpinned-docker", Udw, ["CWE-829"], Medium, High,
        "docker action without an image digest",
        "`docker://image:tag` references re-resolve the tag at each run. Only an \
         `@sha256:` digest guarantees the same image bytes.";
    "udw.commented-uses", Udw, ["CWE-829"], Low, Low,
        "commented-out action reference with a mutable ref",
        "Commented `uses:` lines get re-enabled during refactors; if the ref was floating \
         it comes back unpinned. Flagging them keeps hygiene ahead of the revert.";
    "tmw.pull-request-target", Tmw, ["CWE-862"], High, Medium,
        "privileged trigger runs against attacker-influenced events",
        "`pull_request_target` and `workflow_run` execute in the base repository context \
         with full secrets and a write token, while the triggering event is controlled by \
         any fork contributor. Unless the workflow is carefully read-only it is a \
         privilege-escalation path.";
    "tmw.prt-unsafe-checkout", Tmw, ["CWE-862"], High, High,
        "privileged trigger combined with checkout of the PR head",
        "Checking out `github.event.pull_request.head.*` under a privileged trigger \
         executes fork-controlled code (build scripts, hooks) with repository secrets in \
         scope. This is the canonical pwn-request pattern.";
    "tmw.self-hosted-runner", Tmw, ["CWE-862"], Medium, Medium,
        "self-hosted runner exposed to external triggers",
        "Self-hosted runners persist between jobs and sit inside your network. Letting \
         externally-triggerable events schedule work on them gives outsiders a foothold \
         the ephemeral GitHub-hosted VMs don't.";
    "iw.untrusted-run", Iw, ["CWE-20", "CWE-94"], High, High,
        "attacker-controlled expression expanded in a run script",
        "`${{ }}` expansion happens before the shell parses the script, so PR titles, \
         branch names, issue bodies, or workflow inputs containing shell metacharacters \
         become arbitrary command execution. Route untrusted values through an \
         environment variable and quote them instead.";
    "iw.env-path-write", Iw, ["CWE-20", "CWE-94"], High, Medium,
        "expression written to $GITHUB_ENV or $GITHUB_PATH",
        "Lines appended to $GITHUB_ENV/$GITHUB_PATH are parsed by the runner and shape \
         later steps' environment and PATH lookup. Writing expression-derived data there \
         lets crafted input inject variables or hijack binaries in subsequent steps.";
    "iw.deprecated-commands", Iw, ["CWE-20", "CWE-94"], Medium, High,
        "deprecated workflow command in use",
        "`::set-env`/`::add-path` were disabled because any step output could poison the \
         environment of later steps; re-enabling them via \
         ACTIONS_ALLOW_UNSECURE_COMMANDS restores that injection channel.";
    "iw.conditional-expression", Iw, ["CWE-20", "CWE-94"], Low, Low,
        "unclassified context expanded in a run script",
        "Contexts that are neither provably repository-controlled nor on the untrusted \
         list (e.g. `github.actor`, step outputs) still reach the shell unquoted. Worth \
         reviewing under a strict policy.";
    "sew.secrets-inherit", Sew, ["CWE-200", "CWE-522"], High, High,
        "all repository secrets passed to a reusable workflow",
        "`secrets: inherit` forwards every repository and organization secret, not just \
         what the callee needs. If the called workflow is external or later compromised, \
         the whole secret store is exposed in one hop.";
    "sew.secret-env-write", Sew, ["CWE-200", "CWE-522"], High, Medium,
        "secret written to a runner environment file",
        "Secrets redirected into $GITHUB_ENV or $GITHUB_OUTPUT become plain environment \
         data: log masking no longer applies reliably and every later step (including \
         third-party actions) can read them.";
    "sew.container-credentials", Sew, ["CWE-200", "CWE-522"], Medium, Medium,
        "credentials embedded in container or service definitions",
        "Registry credentials in `container:`/`services:` blocks put secret material in \
         workflow scope for every job run; a hardcoded value is directly leaked, and a \
         secret expansion widens where the secret travels.";
    "sew.hardcoded-secret", Sew, ["CWE-200", "CWE-522"], High, Medium,
        "hardcoded secret-like value in the workflow",
        "Credential material committed into workflow YAML is readable by anyone with \
         repository read access and survives in git history. Provider-shaped tokens and \
         high-entropy values assigned to secret-named keys are flagged.";
    "epw.write-scopes", Epw, ["CWE-250", "CWE-732"], Medium, High,
        "GITHUB_TOKEN granted write scopes",
        "Write scopes on the job token turn any compromised step into an author: it can \
         push code, edit pull requests, or tamper with releases. Declare the narrowest \
         scopes each job actually needs.";
    "epw.missing-permissions", Epw, ["CWE-250", "CWE-732"], Low, Medium,
        "no top-level permissions block declared",
        "Without an explicit `permissions:` block the token falls back to the \
         repository/organization default, which is often broader than needed and changes \
         outside the workflow's review history. Declaring it pins least privilege.";
    "cfw.always-true-condition", Cfw, ["CWE-571"], Medium, High,
        "condition can never be false",
        "An `if:` whose string value is always non-empty never gates anything: the \
         guarded job or step runs every time, including in the situations the condition \
         was meant to exclude. The usual cause is a block scalar adding a trailing \
         newline around a `${{ }}` expression.";
    "cfw.forced-run", Cfw, ["CWE-571"], Low, High,
        "condition forces execution with always()",
        "`always()` runs the step even when the job is cancelled or earlier steps \
         failed. Legitimate for cleanup, but on sensitive steps it bypasses the implicit \
         success gate, so it deserves review.";
    "grcw.deprecated-action", Grcw, ["CWE-477", "CWE-440"], Medium, High,
        "action major version relies on a retired runtime",
        "Actions built on runtimes the platform has removed fail or get force-disabled at \
         run time. A failing guardrail job is indistinguishable from a skipped one, so \
         required checks quietly stop protecting the branch.";
    "grcw.undefined-needs", Grcw, ["CWE-477", "CWE-440"], Medium, High,
        "reference to an undefined job",
        "`needs` edges and `needs.<job>` expressions naming a job that doesn't exist make \
         the dependent job unschedulable or its condition unresolvable, so it is skipped. \
         Skipped security jobs disable the checks they were carrying.";
    "grcw.structural-anomaly", Grcw, ["CWE-477", "CWE-440"], Low, Medium,
        "workflow structure the platform won't accept as written",
        "Unknown or duplicate keys and malformed blocks are silently ignored or \
         re-interpreted by the platform. Whatever behavior the author intended with \
         those keys is not happening.";
    "grcw.unknown-context", Grcw, ["CWE-477", "CWE-440"], Low, Medium,
        "expression references an unknown context root",
        "Context roots outside the documented set evaluate to nothing or fail workflow \
         validation, which usually means a typo and an expression that never does what \
         it claims.";
    "hgw.no-security-scanner", Hgw, ["CWE-223"], Low, Medium,
        "pipeline runs no security tooling",
        "A CI pipeline with no SAST, dependency audit, or secret scanning step gives \
         vulnerable or malicious changes a clean path to production; there is no \
         automated control to catch them.";
    "aiw.untrusted-checkout-run", Aiw, ["CWE-353", "CWE-494"], Medium, High,
        "code from an untrusted source is checked out and executed",
        "Checking out a fork's PR head (or a repository outside the trusted owners) and \
         then running build commands in the same job executes unreviewed third-party \
         code inside your pipeline.";
    "aiw.unverified-artifact", Aiw, ["CWE-353", "CWE-494"], Medium, Medium,
        "artifact consumed without integrity verification",
        "Artifacts downloaded from run storage propagate between jobs without any \
         integrity guarantee. Without a checksum or signature check, a poisoned artifact \
         flows straight into later build or deploy stages.";
    "kvcw.known-vulnerable", Kvcw, ["CWE-1395"], Medium, High,
        "referenced action version has a published advisory",
        "Running an action version inside a published advisory's affected range means \
         the pipeline carries a known, already-disclosed exploit. Upgrade to the fixed \
         version.";
    "kvcw.unresolvable-version", Kvcw, ["CWE-1395"], Low, Low,
        "ref version could not be resolved for advisory matching",
        "Advisory coverage is only as good as version resolution. Refs that resolve to \
         no comparable version are opaque to vulnerability matching, so their risk is \
         unknown rather than absent.";
}

pub fn all_rules() -> &'static [RuleMeta] {
    RULES
}

/// Look up one rule; unknown ids are an error.
pub fn rule(rule_id: &str) -> Result<&'static RuleMeta, UnknownRule> {
    RULES
        .iter()
        .find(|r| r.id == rule_id)
        .ok_or_else(|| UnknownRule {
            rule_id: rule_id.to_string(),
        })
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("unknown rule id `{rule_id}`")]
pub struct UnknownRule {
    pub rule_id: String,
}

impl RuleMeta {
    /// Start a finding for this rule at `span`.
    pub fn finding(&'static self, span: SourceSpan, message: impl Into<String>) -> FindingBuilder {
        FindingBuilder {
            meta: self,
            severity: self.default_severity,
            confidence: self.default_confidence,
            span,
            message: message.into(),
            fix: None,
            related: Vec::new(),
        }
    }

    /// Which built-in profiles enable this rule.
    pub fn enabled_in(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, profile) in [
            ("conservative", Profile::conservative()),
            ("balanced", Profile::balanced()),
            ("permissive", Profile::permissive()),
        ] {
            if profile.rule_enabled(self.id) {
                out.push(name);
            }
        }
        out
    }
}

pub struct FindingBuilder {
    meta: &'static RuleMeta,
    severity: Severity,
    confidence: Confidence,
    span: SourceSpan,
    message: String,
    fix: Option<TextEdit>,
    related: Vec<RelatedSpan>,
}

impl FindingBuilder {
    pub fn severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    pub fn confidence(mut self, confidence: Confidence) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn related(mut self, label: impl Into<String>, span: SourceSpan) -> Self {
        self.related.push(RelatedSpan {
            label: label.into(),
            span,
        });
        self
    }

    pub fn fix(mut self, fix: TextEdit) -> Self {
        self.fix = Some(fix);
        self
    }

    pub fn build(self) -> Finding {
        Finding {
            rule_id: self.meta.id.to_string(),
            weakness: self.meta.weakness,
            cwe: self.meta.cwe.iter().map(|c| c.to_string()).collect(),
            severity: self.severity,
            confidence: self.confidence,
            span: self.span,
            message: self.message,
            fix: self.fix,
            related: self.related,
        }
    }
}

/// Machine-readable catalog export: one record per rule with its weakness,
/// CWEs, default severity, and the built-in profiles enabling it.
pub fn export_catalog() -> serde_json::Value {
    let rules: Vec<serde_json::Value> = RULES
        .iter()
        .map(|r| {
            serde_json::json!({
                "id": r.id,
                "weakness": r.weakness.acronym(),
                "weakness_name": r.weakness.full_name(),
                "cwe": r.cwe,
                "default_severity": r.default_severity.as_str(),
                "profiles": r.enabled_in(),
                "summary": r.summary,
            })
        })
        .collect();
    serde_json::json!({ "rules": rules })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_ids_are_unique_and_prefixed_by_weakness() {
        let mut seen = std::collections::HashSet::new();
        for rule in RULES {
            assert!(seen.insert(rule.id), "duplicate rule id {}", rule.id);
            let prefix = rule.id.split('.').next().unwrap();
            assert_eq!(
                prefix,
                rule.weakness.rule_prefix(),
                "rule {} prefix does not match weakness {}",
                rule.id,
                rule.weakness
            );
        }
    }

    #[test]
    fn every_weakness_has_at_least_one_rule() {
        for weakness in Weakness::ALL {
            assert!(
                RULES.iter().any(|r| r.weakness == weakness),
                "no rule covers {weakness}"
            );
        }
    }

    #[test]
    fn lookup_examples() {
        let udw = rule("udw.unpinned-uses").unwrap();
        assert_eq!(udw.weakness, Weakness::Udw);
        assert_eq!(udw.cwe, ["CWE-829"]);

        let tmw = rule("tmw.pull-request-target").unwrap();
        assert_eq!(tmw.weakness, Weakness::Tmw);
        assert_eq!(tmw.cwe, ["CWE-862"]);

        assert!(rule("nonexistent.rule").is_err());
    }

    #[test]
    fn export_lists_every_rule_once() {
        let export = export_catalog();
        let rules = export["rules"].as_array().unwrap();
        assert_eq!(rules.len(), RULES.len());
        assert!(rules.iter().all(|r| r["profiles"].is_array()));
    }
}
