//! Hardening Gap Weakness: no security tooling anywhere in the pipeline.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::catalog;
use crate::finding::Finding;
use crate::model::{StepKind, WorkflowDoc};
use crate::profile::Profile;

pub fn detect_hgw(doc: &WorkflowDoc, profile: &Profile) -> Vec<Finding> {
    if !profile.hgw.enabled || doc.jobs.is_empty() {
        return Vec::new();
    }

    let (action_prefixes, commands): (Vec<&String>, Vec<&String>) = profile
        .hgw
        .security_tools
        .iter()
        .partition(|t| t.contains('/'));

    static WORD: Lazy<Regex> = Lazy::new(|| Regex::new(r"[A-Za-z0-9_-]+").expect("valid regex"));

    for job in doc.jobs.values() {
        for step in &job.steps {
            match &step.kind {
                StepKind::Uses { uses, .. } => {
                    if action_prefixes.iter().any(|p| uses.action.raw.starts_with(p.as_str())) {
                        return Vec::new();
                    }
                }
                StepKind::Run { script, .. } => {
                    // Single-word tools match on word boundaries; multi-word
                    // entries (e.g. `npm audit`) match as substrings.
                    let words: std::collections::HashSet<&str> =
                        WORD.find_iter(script).map(|m| m.as_str()).collect();
                    for command in &commands {
                        let hit = if command.contains(' ') {
                            script.contains(command.as_str())
                        } else {
                            words.contains(command.as_str())
                        };
                        if hit {
                            return Vec::new();
                        }
                    }
                }
            }
        }
        // Reusable workflow calls to a listed security tool also count.
        if let Some(call) = &job.reusable_call {
            if action_prefixes.iter().any(|p| call.action.raw.starts_with(p.as_str())) {
                return Vec::new();
            }
        }
    }

    let span = doc.jobs_key_span.unwrap_or(doc.span);
    vec![catalog::rule("hgw.no-security-scanner")
        .expect("catalog rule")
        .finding(
            span,
            "no step runs a security scanner (SAST, dependency audit, or secret scan); \
             vulnerable changes have no automated control to catch them"
                .to_string(),
        )
        .build()]
}
