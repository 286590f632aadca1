//! Configuration file loading.
//!
//! The config file is YAML with a strict key set: unknown keys are errors
//! that name the offending key, so typos like `permisions` cannot silently
//! disable policy. A config names a base profile and may override
//! individual detector switches, producing the effective [`Profile`] used
//! by the scan.

use std::path::{Path, PathBuf};

use crate::finding::Severity;
use crate::profile::Profile;
use crate::yaml::{parse_yaml, YamlNode, YamlValue};

pub const DEFAULT_CONFIG_FILE: &str = "wf-sentinel.yml";

#[derive(Debug, Clone)]
pub struct Config {
    /// Base profile name (`conservative`, `balanced`, `permissive`).
    pub profile: String,
    /// Inline profile overrides applied on top of the base.
    overrides: Vec<(String, String, OverrideValue)>,
    pub ignore_rules: Vec<String>,
    pub ignore_paths: Vec<String>,
    pub trusted_owners: Option<Vec<String>>,
    pub official_owners: Option<Vec<String>>,
    pub untrusted_contexts: Vec<String>,
    pub security_tools: Option<Vec<String>>,
    pub advisory_fixture: Option<PathBuf>,
    pub pin_fixture: Option<PathBuf>,
    pub offline: bool,
    pub entropy_threshold: Option<f64>,
    pub min_token_length: Option<usize>,
    /// Minimum severity that makes the scan exit non-zero.
    pub fail_severity: Severity,
}

#[derive(Debug, Clone)]
enum OverrideValue {
    Bool(bool),
    List(Vec<String>),
}

impl Default for Config {
    fn default() -> Self {
        Config {
            profile: "balanced".to_string(),
            overrides: Vec::new(),
            ignore_rules: Vec::new(),
            ignore_paths: Vec::new(),
            trusted_owners: None,
            official_owners: None,
            untrusted_contexts: Vec::new(),
            security_tools: None,
            advisory_fixture: None,
            pin_fixture: None,
            offline: true,
            entropy_threshold: None,
            min_token_length: None,
            fail_severity: Severity::Low,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid YAML: {0}")]
    Yaml(String),
    #[error("unknown config key `{key}`{context}")]
    UnknownKey { key: String, context: String },
    #[error("config key `{key}` expects {expected}")]
    BadValue { key: String, expected: String },
    #[error("unknown profile `{0}`; expected conservative, balanced, or permissive")]
    UnknownProfile(String),
}

impl Config {
    /// Load from an explicit path, or discover `wf-sentinel.yml` in the
    /// working directory; absent files mean defaults.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => {
                let default = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !default.exists() {
                    return Ok(Config::default());
                }
                default
            }
        };
        let bytes = std::fs::read(&path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Config, ConfigError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| ConfigError::Yaml(format!("config is not UTF-8: {e}")))?;
        let tree = parse_yaml(text).map_err(|e| ConfigError::Yaml(e.to_string()))?;
        let mut config = Config::default();
        let Some(root) = tree.root else {
            return Ok(config);
        };
        let Some(map) = root.as_map() else {
            return Err(ConfigError::Yaml("config root must be a mapping".to_string()));
        };

        for (key, _, value) in map.iter_scalar_keys() {
            match key {
                "profile" => parse_profile_key(value, &mut config)?,
                "ignoreRules" => config.ignore_rules = string_list(key, value)?,
                "ignorePaths" => config.ignore_paths = string_list(key, value)?,
                "trustedOwners" => config.trusted_owners = Some(string_list(key, value)?),
                "officialOwners" => config.official_owners = Some(string_list(key, value)?),
                "untrustedContexts" => config.untrusted_contexts = string_list(key, value)?,
                "securityTools" => config.security_tools = Some(string_list(key, value)?),
                "advisoryFixture" => {
                    config.advisory_fixture = Some(PathBuf::from(scalar(key, value)?))
                }
                "pinFixture" => config.pin_fixture = Some(PathBuf::from(scalar(key, value)?)),
                "offline" => config.offline = boolean(key, value)?,
                "entropyThreshold" => {
                    config.entropy_threshold =
                        Some(scalar(key, value)?.parse().map_err(|_| ConfigError::BadValue {
                            key: key.to_string(),
                            expected: "a number".to_string(),
                        })?)
                }
                "minTokenLength" => {
                    config.min_token_length =
                        Some(scalar(key, value)?.parse().map_err(|_| ConfigError::BadValue {
                            key: key.to_string(),
                            expected: "an integer".to_string(),
                        })?)
                }
                "failSeverity" => {
                    let text = scalar(key, value)?;
                    config.fail_severity =
                        Severity::parse(&text).ok_or_else(|| ConfigError::BadValue {
                            key: key.to_string(),
                            expected: "one of low, medium, high, critical".to_string(),
                        })?;
                }
                other => {
                    return Err(ConfigError::UnknownKey {
                        key: other.to_string(),
                        context: String::new(),
                    })
                }
            }
        }
        Ok(config)
    }

    /// Resolve the effective profile: base, then inline overrides, then the
    /// top-level list/threshold settings.
    pub fn effective_profile(&self) -> Result<Profile, ConfigError> {
        let mut profile = Profile::by_name(&self.profile)
            .ok_or_else(|| ConfigError::UnknownProfile(self.profile.clone()))?;
        for (section, key, value) in &self.overrides {
            apply_override(&mut profile, section, key, value)?;
        }
        if let Some(owners) = &self.trusted_owners {
            profile.aiw.trusted_owners = owners.clone();
        }
        if let Some(owners) = &self.official_owners {
            profile.official_owners = owners.clone();
        }
        if let Some(tools) = &self.security_tools {
            profile.hgw.security_tools = tools.clone();
        }
        profile
            .extra_untrusted_contexts
            .extend(self.untrusted_contexts.iter().cloned());
        if let Some(threshold) = self.entropy_threshold {
            profile.secrets.entropy_threshold = threshold;
        }
        if let Some(len) = self.min_token_length {
            profile.secrets.min_token_length = len;
        }
        Ok(profile)
    }

    /// Does a rule id survive the ignore list?
    pub fn rule_selected(&self, rule_id: &str) -> bool {
        !self.ignore_rules.iter().any(|g| glob_match(g, rule_id))
    }

    pub fn path_selected(&self, path: &str) -> bool {
        !self.ignore_paths.iter().any(|g| glob_match(g, path))
    }
}

fn parse_profile_key(value: &YamlNode, config: &mut Config) -> Result<(), ConfigError> {
    match &value.value {
        YamlValue::Scalar(s) => {
            config.profile = s.text.trim().to_string();
            Ok(())
        }
        YamlValue::Map(map) => {
            for (section, _, section_value) in map.iter_scalar_keys() {
                if section == "base" {
                    config.profile = scalar("profile.base", section_value)?;
                    continue;
                }
                let section_map =
                    section_value
                        .as_map()
                        .ok_or_else(|| ConfigError::BadValue {
                            key: format!("profile.{section}"),
                            expected: "a mapping of overrides".to_string(),
                        })?;
                for (key, _, v) in section_map.iter_scalar_keys() {
                    let value = match &v.value {
                        YamlValue::Scalar(_) => OverrideValue::Bool(boolean(key, v)?),
                        YamlValue::Seq(_) => {
                            OverrideValue::List(string_list(key, v)?)
                        }
                        YamlValue::Map(_) => {
                            return Err(ConfigError::BadValue {
                                key: format!("profile.{section}.{key}"),
                                expected: "a boolean or list".to_string(),
                            })
                        }
                    };
                    config
                        .overrides
                        .push((section.to_string(), key.to_string(), value));
                }
            }
            Ok(())
        }
        YamlValue::Seq(_) => Err(ConfigError::BadValue {
            key: "profile".to_string(),
            expected: "a profile name or override mapping".to_string(),
        }),
    }
}

fn apply_override(
    profile: &mut Profile,
    section: &str,
    key: &str,
    value: &OverrideValue,
) -> Result<(), ConfigError> {
    let unknown = || ConfigError::UnknownKey {
        key: key.to_string(),
        context: format!(" in profile section `{section}`"),
    };
    let want_bool = || match value {
        OverrideValue::Bool(b) => Ok(*b),
        OverrideValue::List(_) => Err(ConfigError::BadValue {
            key: format!("profile.{section}.{key}"),
            expected: "a boolean".to_string(),
        }),
    };
    let want_list = || match value {
        OverrideValue::List(l) => Ok(l.clone()),
        OverrideValue::Bool(_) => Err(ConfigError::BadValue {
            key: format!("profile.{section}.{key}"),
            expected: "a list".to_string(),
        }),
    };

    match section {
        "udw" => match key {
            "officialExempt" => profile.udw.official_exempt = want_bool()?,
            "skipDefaultBranchRefs" => profile.udw.skip_default_branch_refs = want_bool()?,
            "includeCommented" => profile.udw.include_commented = want_bool()?,
            "includeReusableWorkflows" => profile.udw.include_reusable_workflows = want_bool()?,
            "includeDockerRefs" => profile.udw.include_docker_refs = want_bool()?,
            _ => return Err(unknown()),
        },
        "epw" => match key {
            "flagMissingTopLevel" => profile.epw.flag_missing_top_level = want_bool()?,
            "externallyTriggerableOnly" => profile.epw.externally_triggerable_only = want_bool()?,
            "jobLevel" => profile.epw.job_level = want_bool()?,
            _ => return Err(unknown()),
        },
        "tmw" => match key {
            "flagSelfHosted" => profile.tmw.flag_self_hosted = want_bool()?,
            "requireCheckoutForPRT" => profile.tmw.require_checkout_for_prt = want_bool()?,
            _ => return Err(unknown()),
        },
        "sew" => match key {
            "inheritIsFinding" => profile.sew.inherit_is_finding = want_bool()?,
            "envFileWriteIsFinding" => profile.sew.env_file_write_is_finding = want_bool()?,
            "containerCredentials" => profile.sew.container_credentials = want_bool()?,
            _ => return Err(unknown()),
        },
        "aiw" => match key {
            "trustedOwners" => profile.aiw.trusted_owners = want_list()?,
            "requireChecksumAfterDownload" => {
                profile.aiw.require_checksum_after_download = want_bool()?
            }
            _ => return Err(unknown()),
        },
        "hgw" => match key {
            "enabled" => profile.hgw.enabled = want_bool()?,
            "securityToolList" => profile.hgw.security_tools = want_list()?,
            _ => return Err(unknown()),
        },
        "iw" => match key {
            "deprecatedCommands" => profile.iw.deprecated_commands = want_bool()?,
            "envPathSinks" => profile.iw.env_path_sinks = want_bool()?,
            "conditionalUntrusted" => profile.iw.conditional_untrusted = want_bool()?,
            _ => return Err(unknown()),
        },
        "cfw" => match key {
            "forcedRunSubRule" => profile.cfw.forced_run_subrule = want_bool()?,
            _ => return Err(unknown()),
        },
        "grcw" => match key {
            "deprecatedActions" => profile.grcw.deprecated_actions = want_bool()?,
            "undefinedNeeds" => profile.grcw.undefined_needs = want_bool()?,
            "structuralAnomalies" => profile.grcw.structural_anomalies = want_bool()?,
            "unknownContexts" => profile.grcw.unknown_contexts = want_bool()?,
            _ => return Err(unknown()),
        },
        "kvcw" => match key {
            "enabled" => profile.kvcw.enabled = want_bool()?,
            "informationalUnresolvable" => {
                profile.kvcw.informational_unresolvable = want_bool()?
            }
            _ => return Err(unknown()),
        },
        other => {
            return Err(ConfigError::UnknownKey {
                key: other.to_string(),
                context: " in profile overrides".to_string(),
            })
        }
    }
    profile.name = format!("{}+overrides", profile.name.trim_end_matches("+overrides"));
    Ok(())
}

fn scalar(key: &str, node: &YamlNode) -> Result<String, ConfigError> {
    node.scalar_text()
        .map(|s| s.trim().to_string())
        .ok_or_else(|| ConfigError::BadValue {
            key: key.to_string(),
            expected: "a scalar value".to_string(),
        })
}

fn boolean(key: &str, node: &YamlNode) -> Result<bool, ConfigError> {
    node.as_bool().ok_or_else(|| ConfigError::BadValue {
        key: key.to_string(),
        expected: "true or false".to_string(),
    })
}

fn string_list(key: &str, node: &YamlNode) -> Result<Vec<String>, ConfigError> {
    match &node.value {
        YamlValue::Scalar(s) => Ok(vec![s.text.trim().to_string()]),
        YamlValue::Seq(items) => items
            .iter()
            .map(|item| {
                item.scalar_text()
                    .map(|s| s.trim().to_string())
                    .ok_or_else(|| ConfigError::BadValue {
                        key: key.to_string(),
                        expected: "a list of strings".to_string(),
                    })
            })
            .collect(),
        YamlValue::Map(_) => Err(ConfigError::BadValue {
            key: key.to_string(),
            expected: "a list of strings".to_string(),
        }),
    }
}

/// Minimal glob matching: `*` matches any run of characters.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    fn inner(pat: &[u8], text: &[u8]) -> bool {
        match pat.split_first() {
            None => text.is_empty(),
            Some((b'*', rest)) => {
                (0..=text.len()).any(|skip| inner(rest, &text[skip..]))
            }
            Some((c, rest)) => text.split_first().is_some_and(|(t, tr)| t == c && inner(rest, tr)),
        }
    }
    inner(pattern.as_bytes(), text.as_bytes())
}
