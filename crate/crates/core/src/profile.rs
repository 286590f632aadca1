//! Detection profiles.
//!
//! A profile parameterizes every detector, encoding a posture between
//! conservative (few, high-confidence findings) and permissive (flag
//! everything that could matter). Three built-ins ship with the scanner;
//! conservative enables a strict subset of balanced's rules, which enables a
//! strict subset of permissive's.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UdwOptions {
    /// Exempt actions owned by the official owners list (`actions`, `github`).
    pub official_exempt: bool,
    /// Skip refs literally named `main`/`master`.
    pub skip_default_branch_refs: bool,
    /// Also flag refs recovered from commented-out lines.
    pub include_commented: bool,
    /// Also flag reusable-workflow calls (`jobs.<id>.uses`).
    pub include_reusable_workflows: bool,
    /// Also flag `docker://` refs without an image digest.
    pub include_docker_refs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpwOptions {
    /// Flag workflows with no top-level `permissions:` block.
    pub flag_missing_top_level: bool,
    /// Only fire on workflows with externally-triggerable events.
    pub externally_triggerable_only: bool,
    /// Inspect job-level permissions, not just the workflow block.
    pub job_level: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TmwOptions {
    /// Flag self-hosted runner labels on externally-triggerable workflows.
    pub flag_self_hosted: bool,
    /// When true, privileged triggers alone are not reported; only the
    /// combination with a PR-head checkout is.
    pub require_checkout_for_prt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SewOptions {
    pub inherit_is_finding: bool,
    pub env_file_write_is_finding: bool,
    pub container_credentials: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiwOptions {
    /// Owners whose repositories may be checked out and executed.
    pub trusted_owners: Vec<String>,
    /// Require a checksum/signature verification step after artifact
    /// downloads in the same job.
    pub require_checksum_after_download: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HgwOptions {
    pub enabled: bool,
    /// `owner/repo` prefixes of security actions plus scanner command names.
    pub security_tools: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IwOptions {
    /// Flag deprecated workflow commands (`::set-env`, `::add-path`).
    pub deprecated_commands: bool,
    /// Treat writes of expressions to $GITHUB_ENV/$GITHUB_PATH as sinks.
    pub env_path_sinks: bool,
    /// Also flag conditionally-trusted expressions in run scripts.
    pub conditional_untrusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfwOptions {
    /// Report `always()` conditions as a separate low-severity sub-rule.
    pub forced_run_subrule: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrcwOptions {
    pub deprecated_actions: bool,
    pub undefined_needs: bool,
    pub structural_anomalies: bool,
    pub unknown_contexts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KvcwOptions {
    pub enabled: bool,
    /// Emit informational notes for refs whose version cannot be resolved.
    pub informational_unresolvable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecretScanOptions {
    /// Shannon entropy gate in bits per character.
    pub entropy_threshold: f64,
    pub min_token_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub name: String,
    pub udw: UdwOptions,
    pub epw: EpwOptions,
    pub tmw: TmwOptions,
    pub sew: SewOptions,
    pub aiw: AiwOptions,
    pub hgw: HgwOptions,
    pub iw: IwOptions,
    pub cfw: CfwOptions,
    pub grcw: GrcwOptions,
    pub kvcw: KvcwOptions,
    pub secrets: SecretScanOptions,
    /// Owners considered platform-official for UDW exemption.
    pub official_owners: Vec<String>,
    /// Additional untrusted context patterns from configuration.
    pub extra_untrusted_contexts: Vec<String>,
}

pub const BUILTIN_PROFILES: &[&str] = &["conservative", "balanced", "permissive"];

/// Default curated security-tool list for the hardening-gap check:
/// `owner/repo` prefixes match `uses:` targets; bare names match commands
/// invoked in `run:` scripts.
pub const DEFAULT_SECURITY_TOOLS: &[&str] = &[
    "github/codeql-action",
    "ossf/scorecard-action",
    "zizmorcore/zizmor-action",
    "gitleaks/gitleaks-action",
    "trufflesecurity/trufflehog",
    "aquasecurity/trivy-action",
    "snyk/actions",
    "returntocorp/semgrep-action",
    "semgrep/semgrep-action",
    "anchore/scan-action",
    "codeql",
    "semgrep",
    "gitleaks",
    "trivy",
    "grype",
    "trufflehog",
    "ggshield",
    "bandit",
    "osv-scanner",
    "zizmor",
    "actionlint",
    "cargo-audit",
    "npm audit",
    "pip-audit",
];

fn default_security_tools() -> Vec<String> {
    DEFAULT_SECURITY_TOOLS.iter().map(|s| s.to_string()).collect()
}

fn official_owners() -> Vec<String> {
    vec!["actions".to_string(), "github".to_string()]
}

impl Profile {
    pub fn conservative() -> Profile {
        Profile {
            name: "conservative".to_string(),
            udw: UdwOptions {
                official_exempt: true,
                skip_default_branch_refs: true,
                include_commented: false,
                include_reusable_workflows: false,
                include_docker_refs: false,
            },
            epw: EpwOptions {
                flag_missing_top_level: false,
                externally_triggerable_only: true,
                job_level: false,
            },
            tmw: TmwOptions {
                flag_self_hosted: false,
                require_checkout_for_prt: true,
            },
            sew: SewOptions {
                inherit_is_finding: true,
                env_file_write_is_finding: false,
                container_credentials: false,
            },
            aiw: AiwOptions {
                trusted_owners: official_owners(),
                require_checksum_after_download: false,
            },
            hgw: HgwOptions {
                enabled: false,
                security_tools: default_security_tools(),
            },
            iw: IwOptions {
                deprecated_commands: true,
                env_path_sinks: false,
                conditional_untrusted: false,
            },
            cfw: CfwOptions {
                forced_run_subrule: false,
            },
            grcw: GrcwOptions {
                deprecated_actions: true,
                undefined_needs: true,
                structural_anomalies: false,
                unknown_contexts: false,
            },
            kvcw: KvcwOptions {
                enabled: true,
                informational_unresolvable: false,
            },
            secrets: SecretScanOptions {
                entropy_threshold: 3.5,
                min_token_length: 16,
            },
            official_owners: official_owners(),
            extra_untrusted_contexts: Vec::new(),
        }
    }

    pub fn balanced() -> Profile {
        let mut p = Profile::conservative();
        p.name = "balanced".to_string();
        p.udw.skip_default_branch_refs = false;
        p.udw.include_reusable_workflows = true;
        p.udw.include_docker_refs = true;
        p.epw.externally_triggerable_only = false;
        p.epw.job_level = true;
        p.tmw.flag_self_hosted = true;
        p.tmw.require_checkout_for_prt = false;
        p.sew.env_file_write_is_finding = true;
        p.sew.container_credentials = true;
        p.aiw.require_checksum_after_download = true;
        p.hgw.enabled = true;
        p.iw.env_path_sinks = true;
        p.cfw.forced_run_subrule = true;
        p.grcw.structural_anomalies = true;
        p
    }

    pub fn permissive() -> Profile {
        let mut p = Profile::balanced();
        p.name = "permissive".to_string();
        p.udw.official_exempt = false;
        p.udw.include_commented = true;
        p.epw.flag_missing_top_level = true;
        p.iw.conditional_untrusted = true;
        p.grcw.unknown_contexts = true;
        p.kvcw.informational_unresolvable = true;
        p
    }

    pub fn by_name(name: &str) -> Option<Profile> {
        match name {
            "conservative" => Some(Profile::conservative()),
            "balanced" => Some(Profile::balanced()),
            "permissive" => Some(Profile::permissive()),
            _ => None,
        }
    }

    /// Is a rule enabled under this profile? This is the single source of
    /// truth tying rule ids to profile switches.
    pub fn rule_enabled(&self, rule_id: &str) -> bool {
        match rule_id {
            "udw.unpinned-uses" => true,
            "udw.unpinned-reusable" => self.udw.include_reusable_workflows,
            "udw.unpinned-docker" => self.udw.include_docker_refs,
            "udw.commented-uses" => self.udw.include_commented,
            "tmw.prt-unsafe-checkout" => true,
            "tmw.pull-request-target" => !self.tmw.require_checkout_for_prt,
            "tmw.self-hosted-runner" => self.tmw.flag_self_hosted,
            "iw.untrusted-run" => true,
            "iw.env-path-write" => self.iw.env_path_sinks,
            "iw.deprecated-commands" => self.iw.deprecated_commands,
            "iw.conditional-expression" => self.iw.conditional_untrusted,
            "sew.secrets-inherit" => self.sew.inherit_is_finding,
            "sew.secret-env-write" => self.sew.env_file_write_is_finding,
            "sew.container-credentials" => self.sew.container_credentials,
            "sew.hardcoded-secret" => true,
            "epw.write-scopes" => true,
            "epw.missing-permissions" => self.epw.flag_missing_top_level,
            "cfw.always-true-condition" => true,
            "cfw.forced-run" => self.cfw.forced_run_subrule,
            "grcw.deprecated-action" => self.grcw.deprecated_actions,
            "grcw.undefined-needs" => self.grcw.undefined_needs,
            "grcw.structural-anomaly" => self.grcw.structural_anomalies,
            "grcw.unknown-context" => self.grcw.unknown_contexts,
            "hgw.no-security-scanner" => self.hgw.enabled,
            "aiw.untrusted-checkout-run" => true,
            "aiw.unverified-artifact" => self.aiw.require_checksum_after_download,
            "kvcw.known-vulnerable" => self.kvcw.enabled,
            "kvcw.unresolvable-version" => self.kvcw.enabled && self.kvcw.informational_unresolvable,
            _ => false,
        }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::balanced()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn builtin_rule_sets_are_nested_subsets() {
        let cons = Profile::conservative();
        let bal = Profile::balanced();
        let perm = Profile::permissive();
        for rule in catalog::all_rules() {
            if cons.rule_enabled(rule.id) {
                assert!(bal.rule_enabled(rule.id), "{} in conservative but not balanced", rule.id);
            }
            if bal.rule_enabled(rule.id) {
                assert!(perm.rule_enabled(rule.id), "{} in balanced but not permissive", rule.id);
            }
        }
        let count = |p: &Profile| {
            catalog::all_rules()
                .iter()
                .filter(|r| p.rule_enabled(r.id))
                .count()
        };
        assert!(count(&cons) < count(&bal));
        assert!(count(&bal) < count(&perm));
    }

    #[test]
    fn by_name_resolves_builtins() {
        for name in BUILTIN_PROFILES {
            assert_eq!(Profile::by_name(name).unwrap().name, *name);
        }
        assert!(Profile::by_name("bogus").is_none());
    }
}
