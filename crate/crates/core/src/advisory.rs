//! Known-vulnerability lookup for reused actions.
//!
//! Advisories come from either a JSON fixture (OSV-shaped, so real OSV
//! exports drop in directly) or a live OSV-compatible query endpoint.
//! Version matching uses half-open ranges `[introduced, fixed)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::finding::Severity;
use crate::model::ActionRef;

/// A lenient semantic version. `v4` parses as `4.0.0` with `coarse` set,
/// recording that minor/patch were not written.
#[derive(Debug, Clone, Serialize)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub prerelease: Option<String>,
    /// Number of numeric components actually present (1 for `v4`).
    pub precision: u8,
}

impl Version {
    pub fn new(major: u64, minor: u64, patch: u64) -> Version {
        Version {
            major,
            minor,
            patch,
            prerelease: None,
            precision: 3,
        }
    }

    pub fn is_coarse(&self) -> bool {
        self.precision < 3
    }

    fn key(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.key().cmp(&other.key()) {
            Ordering::Equal => compare_prerelease(&self.prerelease, &other.prerelease),
            ord => ord,
        }
    }
}

impl std::fmt::Display for Version {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if let Some(pre) = &self.prerelease {
            write!(f, "-{pre}")?;
        }
        Ok(())
    }
}

/// A release sorts after any of its prereleases; prerelease identifiers
/// compare numerically when both are numeric, otherwise by ASCII, with the
/// shorter list losing ties.
fn compare_prerelease(a: &Option<String>, b: &Option<String>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(a), Some(b)) => {
            let (xs, ys): (Vec<&str>, Vec<&str>) = (a.split('.').collect(), b.split('.').collect());
            for (x, y) in xs.iter().zip(ys.iter()) {
                let ord = match (x.parse::<u64>(), y.parse::<u64>()) {
                    (Ok(xn), Ok(yn)) => xn.cmp(&yn),
                    (Ok(_), Err(_)) => Ordering::Less,
                    (Err(_), Ok(_)) => Ordering::Greater,
                    (Err(_), Err(_)) => x.cmp(y),
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            xs.len().cmp(&ys.len())
        }
    }
}

/// Parse a version string, stripping a leading `v`. Returns `None` for
/// non-numeric refs such as `main`.
pub fn parse_version(text: &str) -> Option<Version> {
    let trimmed = text.trim();
    let body = trimmed
        .strip_prefix('v')
        .or_else(|| trimmed.strip_prefix('V'))
        .unwrap_or(trimmed);
    if body.is_empty() {
        return None;
    }
    let (numbers, prerelease) = match body.split_once('-') {
        Some((n, pre)) => (n, Some(pre.to_string())),
        None => (body, None),
    };
    let mut parts = [0u64; 3];
    let mut precision = 0u8;
    for (i, part) in numbers.split('.').enumerate() {
        if i >= 3 {
            return None;
        }
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        parts[i] = part.parse().ok()?;
        precision += 1;
    }
    if precision == 0 {
        return None;
    }
    Some(Version {
        major: parts[0],
        minor: parts[1],
        patch: parts[2],
        prerelease,
        precision,
    })
}

/// A half-open version range `[introduced, fixed)`; an absent `fixed`
/// leaves the range open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionRange {
    pub introduced: Version,
    pub fixed: Option<Version>,
}

impl VersionRange {
    pub fn contains(&self, version: &Version) -> bool {
        if *version < self.introduced {
            return false;
        }
        match &self.fixed {
            Some(fixed) => version < fixed,
            None => true,
        }
    }

    /// Does every concrete version inside the range share the major (and,
    /// for two-component versions, minor) prefix of `coarse`?
    fn entirely_within_prefix(&self, coarse: &Version) -> bool {
        let (low, high) = match coarse.precision {
            1 => (
                Version::new(coarse.major, 0, 0),
                Version::new(coarse.major + 1, 0, 0),
            ),
            2 => (
                Version::new(coarse.major, coarse.minor, 0),
                Version::new(coarse.major, coarse.minor + 1, 0),
            ),
            _ => return false,
        };
        let Some(fixed) = &self.fixed else {
            return false;
        };
        self.introduced >= low && *fixed <= high
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Advisory {
    pub id: String,
    /// `owner/repo` of the affected action.
    pub subject: String,
    pub ranges: Vec<VersionRange>,
    pub severity: Severity,
    pub summary: String,
}

/// One advisory hit for a concrete reference.
#[derive(Debug, Clone, Serialize)]
pub struct AdvisoryMatch {
    pub advisory: Advisory,
    /// False when the ref's version was coarse (`v4`) and matched only
    /// because the whole affected range sits inside that major.
    pub exact: bool,
    pub version: Version,
}

#[derive(Debug, thiserror::Error)]
pub enum AdvisoryError {
    #[error("failed to read advisory fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("advisory data is malformed: {0}")]
    Format(String),
    #[error("advisory query failed: {0}")]
    Query(String),
}

/// Backend supplying advisories per `owner/repo` subject.
pub trait AdvisorySource: Send + Sync {
    fn advisories_for(&self, slug: &str) -> Result<Vec<Advisory>, AdvisoryError>;

    /// Whether the source has any data at all; an empty source produces a
    /// scan-level warning instead of silent zero findings.
    fn has_data(&self) -> bool;

    fn describe(&self) -> String;
}

// ---------------------------------------------------------------------------
// OSV-shaped records
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct OsvRecord {
    id: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    severity_label: Option<String>,
    #[serde(default)]
    database_specific: Option<serde_json::Value>,
    #[serde(default)]
    affected: Vec<OsvAffected>,
}

#[derive(Debug, Deserialize)]
struct OsvAffected {
    package: OsvPackage,
    #[serde(default)]
    ranges: Vec<OsvRange>,
}

#[derive(Debug, Deserialize)]
struct OsvPackage {
    name: String,
}

#[derive(Debug, Deserialize)]
struct OsvRange {
    #[serde(default)]
    events: Vec<HashMap<String, String>>,
}

fn osv_severity(record: &OsvRecord) -> Severity {
    let label = record
        .severity_label
        .clone()
        .or_else(|| {
            record
                .database_specific
                .as_ref()
                .and_then(|d| d.get("severity"))
                .and_then(|s| s.as_str())
                .map(str::to_string)
        })
        .unwrap_or_default();
    match label.to_ascii_lowercase().as_str() {
        "low" => Severity::Low,
        "moderate" | "medium" => Severity::Medium,
        "high" => Severity::High,
        "critical" => Severity::Critical,
        _ => Severity::Medium,
    }
}

fn advisories_from_osv(records: Vec<OsvRecord>) -> Result<Vec<Advisory>, AdvisoryError> {
    let mut out = Vec::new();
    for record in records {
        let severity = osv_severity(&record);
        for affected in &record.affected {
            let mut ranges = Vec::new();
            for range in &affected.ranges {
                let mut introduced = None;
                let mut fixed = None;
                for event in &range.events {
                    if let Some(v) = event.get("introduced") {
                        introduced = parse_version(v);
                    }
                    if let Some(v) = event.get("fixed") {
                        fixed = parse_version(v);
                    }
                }
                let Some(introduced) = introduced else {
                    continue;
                };
                if let Some(fixed) = &fixed {
                    if *fixed <= introduced {
                        return Err(AdvisoryError::Format(format!(
                            "advisory {}: fixed version {fixed} does not follow introduced {introduced}",
                            record.id
                        )));
                    }
                }
                ranges.push(VersionRange { introduced, fixed });
            }
            if ranges.is_empty() {
                continue;
            }
            out.push(Advisory {
                id: record.id.clone(),
                subject: affected.package.name.clone(),
                ranges,
                severity,
                summary: record.summary.clone(),
            });
        }
    }
    Ok(out)
}

/// Offline advisory source backed by a JSON fixture of OSV-shaped records.
#[derive(Debug, Default)]
pub struct FixtureAdvisorySource {
    advisories: Vec<Advisory>,
}

/// Advisory records for the fixture shipped with the scanner.
const BUNDLED_ADVISORIES: &str = include_str!("../data/advisory_fixture.json");

impl FixtureAdvisorySource {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, AdvisoryError> {
        let records: Vec<OsvRecord> =
            serde_json::from_slice(bytes).map_err(|e| AdvisoryError::Format(e.to_string()))?;
        Ok(Self {
            advisories: advisories_from_osv(records)?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, AdvisoryError> {
        let bytes = std::fs::read(path).map_err(|source| AdvisoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&bytes)
    }

    /// The advisory set bundled with the scanner.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_ADVISORIES.as_bytes()).expect("bundled advisory data is valid")
    }
}

impl AdvisorySource for FixtureAdvisorySource {
    fn advisories_for(&self, slug: &str) -> Result<Vec<Advisory>, AdvisoryError> {
        Ok(self
            .advisories
            .iter()
            .filter(|a| a.subject == slug)
            .cloned()
            .collect())
    }

    fn has_data(&self) -> bool {
        !self.advisories.is_empty()
    }

    fn describe(&self) -> String {
        format!("offline fixture ({} advisories)", self.advisories.len())
    }
}

/// Live OSV-compatible query endpoint.
#[derive(Debug, Clone)]
pub struct OsvClient {
    pub endpoint: String,
}

impl OsvClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
        }
    }
}

impl AdvisorySource for OsvClient {
    fn advisories_for(&self, slug: &str) -> Result<Vec<Advisory>, AdvisoryError> {
        let url = format!("{}/v1/query", self.endpoint.trim_end_matches('/'));
        let payload = serde_json::json!({
            "package": { "name": slug, "ecosystem": "GitHub Actions" }
        });
        let mut response = ureq::post(&url)
            .header("user-agent", "wf-sentinel")
            .send(payload.to_string().as_bytes())
            .map_err(|e| AdvisoryError::Query(e.to_string()))?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AdvisoryError::Query(e.to_string()))?;
        let body: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| AdvisoryError::Format(e.to_string()))?;
        let records: Vec<OsvRecord> = match body.get("vulns") {
            Some(vulns) => serde_json::from_value(vulns.clone())
                .map_err(|e| AdvisoryError::Format(e.to_string()))?,
            None => Vec::new(),
        };
        advisories_from_osv(records)
    }

    fn has_data(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("live OSV endpoint {}", self.endpoint)
    }
}

/// Advisories affecting `action`, matched by subject and version.
///
/// Coarse versions (`v4`) match a range only when the whole range sits
/// inside that major; such matches are marked non-exact so detectors can
/// reduce confidence.
pub fn lookup_advisories(
    action: &ActionRef,
    source: &dyn AdvisorySource,
) -> Result<Vec<AdvisoryMatch>, AdvisoryError> {
    let Some(slug) = action.slug() else {
        return Ok(Vec::new());
    };
    let Some(version) = action.ref_name.as_deref().and_then(parse_version) else {
        return Ok(Vec::new());
    };
    let advisories = source.advisories_for(&slug)?;
    let mut matches = Vec::new();
    for advisory in advisories {
        let hit = if version.is_coarse() {
            advisory.ranges.iter().any(|r| r.entirely_within_prefix(&version))
        } else {
            advisory.ranges.iter().any(|r| r.contains(&version))
        };
        if hit {
            matches.push(AdvisoryMatch {
                exact: !version.is_coarse(),
                version: version.clone(),
                advisory,
            });
        }
    }
    Ok(matches)
}
