//! Resolution of floating action refs to commit SHAs and byte-precise
//! autofix edits.
//!
//! Fixes rewrite the original bytes instead of re-serializing the model, so
//! comments, ordering, and whitespace survive untouched. Resolution runs
//! either against an offline fixture map (never touches the network) or a
//! live forge API.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::finding::Finding;
use crate::model::{list_action_refs, ActionRef, RefKind, WorkflowDoc};
use crate::span::SourceSpan;

/// One byte-level replacement, optionally annotated with a comment that is
/// inserted at the end of the edited line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEdit {
    pub span: SourceSpan,
    pub replacement: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trailing_comment: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EditError {
    #[error("edit at bytes {start}..{end} is out of bounds (source is {len} bytes)")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("edits at bytes {a_start}..{a_end} and {b_start}..{b_end} overlap")]
    Overlap {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
}

/// Apply non-overlapping edits to `source`. Bytes outside the edit spans
/// (plus inserted trailing comments) are returned unchanged; any overlap or
/// out-of-bounds span rejects the whole batch with no partial output.
pub fn apply_edits(source: &[u8], edits: &[TextEdit]) -> Result<Vec<u8>, EditError> {
    let mut sorted: Vec<&TextEdit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.span.start_byte, e.span.end_byte));
    for edit in &sorted {
        if edit.span.end_byte > source.len() {
            return Err(EditError::OutOfBounds {
                start: edit.span.start_byte,
                end: edit.span.end_byte,
                len: source.len(),
            });
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].span.start_byte < pair[0].span.end_byte {
            return Err(EditError::Overlap {
                a_start: pair[0].span.start_byte,
                a_end: pair[0].span.end_byte,
                b_start: pair[1].span.start_byte,
                b_end: pair[1].span.end_byte,
            });
        }
    }

    // Two operation kinds: span replacements and end-of-line comment
    // insertions. Applying from the back keeps earlier offsets valid.
    enum Op<'a> {
        Replace(usize, usize, &'a str),
        Insert(usize, String),
    }
    let mut ops = Vec::new();
    for edit in &sorted {
        ops.push(Op::Replace(
            edit.span.start_byte,
            edit.span.end_byte,
            &edit.replacement,
        ));
        if let Some(comment) = &edit.trailing_comment {
            let eol = source[edit.span.end_byte..]
                .iter()
                .position(|b| *b == b'\n')
                .map(|i| edit.span.end_byte + i)
                .unwrap_or(source.len());
            ops.push(Op::Insert(eol, format!("  {comment}")));
        }
    }
    ops.sort_by_key(|op| match op {
        Op::Replace(start, ..) => (*start, 0),
        Op::Insert(pos, _) => (*pos, 1),
    });

    let mut out = source.to_vec();
    for op in ops.iter().rev() {
        match op {
            Op::Replace(start, end, text) => {
                out.splice(*start..*end, text.bytes());
            }
            Op::Insert(pos, text) => {
                out.splice(*pos..*pos, text.bytes());
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Resolution sources
// ---------------------------------------------------------------------------

/// Offline map from `owner/repo@ref` to a 40-hex commit SHA.
#[derive(Debug, Clone, Default)]
pub struct PinFixture {
    map: HashMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("failed to read pin fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("pin fixture is not a JSON object of \"owner/repo@ref\" to sha: {0}")]
    Format(#[from] serde_json::Error),
    #[error("pin fixture entry `{key}` maps to `{value}`, which is not a 40-hex sha")]
    BadSha { key: String, value: String },
}

impl PinFixture {
    pub fn from_map(map: HashMap<String, String>) -> Result<PinFixture, FixtureError> {
        for (key, value) in &map {
            if !crate::model::is_full_sha_str(value) {
                return Err(FixtureError::BadSha {
                    key: key.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(PinFixture { map })
    }

    pub fn from_json(bytes: &[u8]) -> Result<PinFixture, FixtureError> {
        let map: HashMap<String, String> = serde_json::from_slice(bytes)?;
        PinFixture::from_map(map)
    }

    pub fn from_file(path: &Path) -> Result<PinFixture, FixtureError> {
        let bytes = std::fs::read(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PinFixture::from_json(&bytes)
    }

    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Reverse lookup: map a pinned sha back to the ref it was resolved
    /// from, used to version sha-pinned refs for advisory matching.
    pub fn ref_for_sha(&self, slug: &str, sha: &str) -> Option<&str> {
        let prefix = format!("{slug}@");
        self.map
            .iter()
            .find(|(k, v)| v.as_str() == sha && k.starts_with(&prefix))
            .map(|(k, _)| &k[prefix.len()..])
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Live forge API client. The endpoint is overridable so tests can point it
/// at a local server.
#[derive(Debug, Clone)]
pub struct ForgeClient {
    pub endpoint: String,
    pub token: Option<String>,
}

impl ForgeClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> ForgeClient {
        ForgeClient {
            endpoint: endpoint.into(),
            token,
        }
    }

    fn resolve(&self, owner: &str, repo: &str, ref_name: &str) -> Result<Resolution, ResolveError> {
        let url = format!(
            "{}/repos/{owner}/{repo}/commits/{ref_name}",
            self.endpoint.trim_end_matches('/')
        );
        let mut request = ureq::get(&url).header("user-agent", "wf-sentinel");
        if let Some(token) = &self.token {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        match request.call() {
            Ok(mut response) => {
                let text = response
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| ResolveError::Protocol(e.to_string()))?;
                let body: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| ResolveError::Protocol(e.to_string()))?;
                match body.get("sha").and_then(|s| s.as_str()) {
                    Some(sha) if crate::model::is_full_sha_str(sha) => {
                        Ok(Resolution::Resolved(sha.to_string()))
                    }
                    Some(_) | None => Ok(Resolution::Unresolved(UnresolvedReason::Ambiguous)),
                }
            }
            Err(ureq::Error::StatusCode(401)) => {
                Err(ResolveError::Auth("forge rejected the provided token".into()))
            }
            Err(ureq::Error::StatusCode(403)) => Err(ResolveError::RateLimited(
                "forge returned 403 (rate limit or insufficient scope)".into(),
            )),
            Err(ureq::Error::StatusCode(404)) => {
                Ok(Resolution::Unresolved(UnresolvedReason::NotInFixture))
            }
            Err(err) => Ok(Resolution::Unresolved(UnresolvedReason::NetworkError(
                err.to_string(),
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ResolutionSource {
    OfflineFixture(PinFixture),
    LiveForge(ForgeClient),
}

impl ResolutionSource {
    pub fn is_offline(&self) -> bool {
        matches!(self, ResolutionSource::OfflineFixture(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnresolvedReason {
    NotInFixture,
    NetworkError(String),
    Ambiguous,
    /// Local, docker, commented-out, or otherwise unpinnable refs.
    UnpinnableKind,
}

impl std::fmt::Display for UnresolvedReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnresolvedReason::NotInFixture => f.write_str("not-in-fixture"),
            UnresolvedReason::NetworkError(e) => write!(f, "network-error: {e}"),
            UnresolvedReason::Ambiguous => f.write_str("ambiguous"),
            UnresolvedReason::UnpinnableKind => f.write_str("unpinnable-kind"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(String),
    Unresolved(UnresolvedReason),
}

#[derive(Debug, thiserror::Error)]
pub enum ResolveError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("unexpected forge response: {0}")]
    Protocol(String),
}

/// Resolve a floating ref to a commit sha.
///
/// Preconditions: the ref kind must be `tag` or `branch`; sha, local, and
/// docker refs are rejected.
pub fn resolve_ref(action: &ActionRef, source: &ResolutionSource) -> Result<Resolution, ResolveError> {
    if !matches!(action.ref_kind, RefKind::Tag | RefKind::Branch) {
        return Err(ResolveError::Precondition(format!(
            "ref `{}` has kind {:?}; only tag and branch refs are resolvable",
            action.raw, action.ref_kind
        )));
    }
    let (Some(slug), Some(ref_name)) = (action.slug(), action.ref_name.as_deref()) else {
        return Err(ResolveError::Precondition(format!(
            "ref `{}` is missing owner/repo or the ref part",
            action.raw
        )));
    };
    match source {
        ResolutionSource::OfflineFixture(fixture) => {
            match fixture.lookup(&format!("{slug}@{ref_name}")) {
                Some(sha) => Ok(Resolution::Resolved(sha.to_string())),
                None => Ok(Resolution::Unresolved(UnresolvedReason::NotInFixture)),
            }
        }
        ResolutionSource::LiveForge(client) => {
            let owner = action.owner.as_deref().unwrap_or_default();
            let repo = action.repo.as_deref().unwrap_or_default();
            client.resolve(owner, repo, ref_name)
        }
    }
}

// ---------------------------------------------------------------------------
// Fix planning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct UnresolvedPin {
    pub action: String,
    pub span: SourceSpan,
    pub reason: UnresolvedReason,
}

#[derive(Debug, Default)]
pub struct PinPlan {
    pub edits: Vec<TextEdit>,
    pub unresolved: Vec<UnresolvedPin>,
}

/// Plan pin fixes for the unpinned-dependency findings of one document.
///
/// Each resolvable finding becomes one edit replacing only the ref token
/// after `@` and appending a `# <original ref>` comment at the end of the
/// line. Commented-out refs are never edited.
pub fn plan_pin_fixes(
    doc: &WorkflowDoc,
    findings: &[Finding],
    source: &ResolutionSource,
) -> PinPlan {
    let mut plan = PinPlan::default();
    let refs = list_action_refs(doc, false);

    for finding in findings {
        if !matches!(
            finding.rule_id.as_str(),
            "udw.unpinned-uses" | "udw.unpinned-reusable" | "udw.unpinned-docker"
        ) {
            continue;
        }
        let Some((action, span)) = refs
            .iter()
            .find(|(_, span)| *span == finding.span || span.contains(&finding.span))
        else {
            // Commented refs are not in the uncommented listing.
            continue;
        };

        if !matches!(action.ref_kind, RefKind::Tag | RefKind::Branch) {
            plan.unresolved.push(UnresolvedPin {
                action: action.raw.clone(),
                span: *span,
                reason: UnresolvedReason::UnpinnableKind,
            });
            continue;
        }

        match resolve_ref(action, source) {
            Ok(Resolution::Resolved(sha)) => {
                if let Some(edit) = ref_token_edit(doc, action, *span, &sha) {
                    plan.edits.push(edit);
                } else {
                    plan.unresolved.push(UnresolvedPin {
                        action: action.raw.clone(),
                        span: *span,
                        reason: UnresolvedReason::Ambiguous,
                    });
                }
            }
            Ok(Resolution::Unresolved(reason)) => plan.unresolved.push(UnresolvedPin {
                action: action.raw.clone(),
                span: *span,
                reason,
            }),
            Err(err) => plan.unresolved.push(UnresolvedPin {
                action: action.raw.clone(),
                span: *span,
                reason: UnresolvedReason::NetworkError(err.to_string()),
            }),
        }
    }

    plan.edits.sort_by_key(|e| e.span.start_byte);
    plan.edits.dedup_by_key(|e| e.span.start_byte);
    plan
}

/// Compute the edit that replaces the `@ref` token of an action reference.
fn ref_token_edit(
    doc: &WorkflowDoc,
    action: &ActionRef,
    span: SourceSpan,
    sha: &str,
) -> Option<TextEdit> {
    let slice = span.slice(&doc.source);
    let raw_offset = slice.find(&action.raw)?;
    let at_offset = action.raw.find('@')?;
    let ref_name = action.ref_name.as_deref()?;
    let token_start = span.start_byte + raw_offset + at_offset + 1;
    let token_end = token_start + ref_name.len();

    let index = crate::span::LineIndex::new(&doc.source);
    let edit_span = index.span(&doc.source, token_start, token_end);

    // Skip the annotation when the line already carries a comment.
    let eol = doc.source[token_end..]
        .find('\n')
        .map(|i| token_end + i)
        .unwrap_or(doc.source.len());
    let rest_of_line = &doc.source[token_end..eol];
    let trailing_comment = if rest_of_line.contains('#') {
        None
    } else {
        Some(format!("# {ref_name}"))
    };

    Some(TextEdit {
        span: edit_span,
        replacement: sha.to_string(),
        trailing_comment,
    })
}
