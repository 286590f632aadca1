//! Finding and severity types shared by every detector.

use serde::{Deserialize, Serialize};

use crate::pin::TextEdit;
use crate::span::SourceSpan;

/// The ten weakness classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Weakness {
    #[serde(rename = "AIW")]
    Aiw,
    #[serde(rename = "CFW")]
    Cfw,
    #[serde(rename = "EPW")]
    Epw,
    #[serde(rename = "GRCW")]
    Grcw,
    #[serde(rename = "HGW")]
    Hgw,
    #[serde(rename = "IW")]
    Iw,
    #[serde(rename = "KVCW")]
    Kvcw,
    #[serde(rename = "SEW")]
    Sew,
    #[serde(rename = "TMW")]
    Tmw,
    #[serde(rename = "UDW")]
    Udw,
}

impl Weakness {
    pub const ALL: [Weakness; 10] = [
        Weakness::Aiw,
        Weakness::Cfw,
        Weakness::Epw,
        Weakness::Grcw,
        Weakness::Hgw,
        Weakness::Iw,
        Weakness::Kvcw,
        Weakness::Sew,
        Weakness::Tmw,
        Weakness::Udw,
    ];

    pub fn acronym(self) -> &'static str {
        match self {
            Weakness::Aiw => "AIW",
            Weakness::Cfw => "CFW",
            Weakness::Epw => "EPW",
            Weakness::Grcw => "GRCW",
            Weakness::Hgw => "HGW",
            Weakness::Iw => "IW",
            Weakness::Kvcw => "KVCW",
            Weakness::Sew => "SEW",
            Weakness::Tmw => "TMW",
            Weakness::Udw => "UDW",
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            Weakness::Aiw => "Artifact Integrity Weakness",
            Weakness::Cfw => "Control Flow Weakness",
            Weakness::Epw => "Excessive Permission Weakness",
            Weakness::Grcw => "GitHub Runner Compatibility Weakness",
            Weakness::Hgw => "Hardening Gap Weakness",
            Weakness::Iw => "Injection Weakness",
            Weakness::Kvcw => "Known Vulnerable Component Weakness",
            Weakness::Sew => "Secrets Exposure Weakness",
            Weakness::Tmw => "Trigger Misuse Weakness",
            Weakness::Udw => "Unpinned Dependency Weakness",
        }
    }

    /// The rule-id prefix for this class (`udw` in `udw.unpinned-uses`).
    pub fn rule_prefix(self) -> &'static str {
        match self {
            Weakness::Aiw => "aiw",
            Weakness::Cfw => "cfw",
            Weakness::Epw => "epw",
            Weakness::Grcw => "grcw",
            Weakness::Hgw => "hgw",
            Weakness::Iw => "iw",
            Weakness::Kvcw => "kvcw",
            Weakness::Sew => "sew",
            Weakness::Tmw => "tmw",
            Weakness::Udw => "udw",
        }
    }

    pub fn from_acronym(text: &str) -> Option<Weakness> {
        Weakness::ALL
            .into_iter()
            .find(|w| w.acronym().eq_ignore_ascii_case(text))
    }
}

impl std::fmt::Display for Weakness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.acronym())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }

    pub fn parse(text: &str) -> Option<Severity> {
        match text.to_ascii_lowercase().as_str() {
            "low" => Some(Severity::Low),
            "medium" => Some(Severity::Medium),
            "high" => Some(Severity::High),
            "critical" => Some(Severity::Critical),
            _ => None,
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Low,
    Medium,
    High,
}

/// A secondary location that gives a finding its context, e.g. the trigger
/// line for a checkout-based finding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelatedSpan {
    pub label: String,
    pub span: SourceSpan,
}

/// One detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub weakness: Weakness,
    pub cwe: Vec<String>,
    pub severity: Severity,
    pub confidence: Confidence,
    pub span: SourceSpan,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fix: Option<TextEdit>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub related: Vec<RelatedSpan>,
}

impl Finding {
    /// Key used for cross-profile set comparisons.
    pub fn identity(&self) -> (String, SourceSpan) {
        (self.rule_id.clone(), self.span)
    }
}

/// A non-finding problem encountered during a scan (missing advisory data,
/// detector-internal failure). Never aborts the scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanDiagnostic {
    pub detector: String,
    pub message: String,
}
