//! Parsing and classification of `uses:` targets.

use serde::Serialize;

/// How the `@ref` part of a `uses:` target is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    /// Exactly 40 lowercase hex characters: an immutable commit pin.
    Sha,
    /// A version-shaped ref: `v`-prefixed or purely numeric-dotted.
    Tag,
    /// A ref containing `/` (e.g. `release/v1`) or a well-known branch name.
    Branch,
    /// `./path` reference local to the repository.
    Local,
    /// `docker://image` reference.
    Docker,
    /// Anything else, including a missing ref.
    Unknown,
}

impl RefKind {
    /// Kinds that point at mutable history and can be resolved to a commit.
    pub fn is_floating(self) -> bool {
        matches!(self, RefKind::Tag | RefKind::Branch | RefKind::Unknown)
    }
}

/// A decomposed `uses:` target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionRef {
    /// The target exactly as written.
    pub raw: String,
    pub owner: Option<String>,
    pub repo: Option<String>,
    /// Path inside the repository for monorepo actions (`owner/repo/sub@ref`).
    pub subpath: Option<String>,
    /// The part after `@`, verbatim.
    pub ref_name: Option<String>,
    pub ref_kind: RefKind,
    /// True when the ref was recovered from a commented-out line.
    pub commented_out: bool,
}

impl ActionRef {
    pub fn parse(raw: &str) -> ActionRef {
        let raw_string = raw.to_string();
        if raw.starts_with("./") {
            return ActionRef {
                raw: raw_string,
                owner: None,
                repo: None,
                subpath: None,
                ref_name: split_ref(raw).1.map(str::to_string),
                ref_kind: RefKind::Local,
                commented_out: false,
            };
        }
        if let Some(image) = raw.strip_prefix("docker://") {
            let _ = image;
            return ActionRef {
                raw: raw_string,
                owner: None,
                repo: None,
                subpath: None,
                ref_name: None,
                ref_kind: RefKind::Docker,
                commented_out: false,
            };
        }

        let (path, ref_name) = split_ref(raw);
        let mut segments = path.splitn(3, '/');
        let owner = segments.next().filter(|s| !s.is_empty()).map(str::to_string);
        let repo = segments.next().filter(|s| !s.is_empty()).map(str::to_string);
        let subpath = segments.next().filter(|s| !s.is_empty()).map(str::to_string);
        let ref_kind = match ref_name {
            Some(r) => classify_ref(r),
            None => RefKind::Unknown,
        };
        ActionRef {
            raw: raw_string,
            owner,
            repo,
            subpath,
            ref_name: ref_name.map(str::to_string),
            ref_kind,
            commented_out: false,
        }
    }

    /// `owner/repo` slug, when both parts are present.
    pub fn slug(&self) -> Option<String> {
        match (&self.owner, &self.repo) {
            (Some(o), Some(r)) => Some(format!("{o}/{r}")),
            _ => None,
        }
    }

    /// True for docker refs pinned by image digest rather than tag.
    pub fn is_digest_pinned(&self) -> bool {
        self.ref_kind == RefKind::Docker && self.raw.contains("@sha256:")
    }
}

fn split_ref(raw: &str) -> (&str, Option<&str>) {
    match raw.split_once('@') {
        Some((path, r)) if !r.is_empty() => (path, Some(r)),
        Some((path, _)) => (path, None),
        None => (raw, None),
    }
}

pub(crate) fn is_full_sha(text: &str) -> bool {
    text.len() == 40
        && text
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn classify_ref(ref_name: &str) -> RefKind {
    if is_full_sha(ref_name) {
        return RefKind::Sha;
    }
    if ref_name.contains('/') {
        return RefKind::Branch;
    }
    // Version-shaped refs: `v1`, `v4.1.2`, `1.2.3`, `v2-beta`.
    let body = ref_name.strip_prefix('v').unwrap_or(ref_name);
    if body
        .split(['.', '-'])
        .next()
        .is_some_and(|first| !first.is_empty() && first.bytes().all(|b| b.is_ascii_digit()))
        && (ref_name.starts_with('v') || body.split('.').all(|p| p.bytes().all(|b| b.is_ascii_digit())))
    {
        return RefKind::Tag;
    }
    // Common default-branch names float with repository history.
    if matches!(ref_name, "main" | "master" | "HEAD") {
        return RefKind::Branch;
    }
    RefKind::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_requires_exactly_forty_lowercase_hex() {
        let sha = "f43a0e5ff2bd294095638e18286ca9a3d1956744";
        assert_eq!(ActionRef::parse(&format!("actions/checkout@{sha}")).ref_kind, RefKind::Sha);
        // 39 chars, uppercase, and non-hex all fall out of the sha class.
        assert_ne!(
            ActionRef::parse("a/b@f43a0e5ff2bd294095638e18286ca9a3d195674").ref_kind,
            RefKind::Sha
        );
        assert_ne!(
            ActionRef::parse("a/b@F43A0E5FF2BD294095638E18286CA9A3D1956744").ref_kind,
            RefKind::Sha
        );
        assert_ne!(
            ActionRef::parse("a/b@z43a0e5ff2bd294095638e18286ca9a3d1956744").ref_kind,
            RefKind::Sha
        );
    }

    #[test]
    fn tags_branches_and_unknowns() {
        assert_eq!(ActionRef::parse("actions/checkout@v3").ref_kind, RefKind::Tag);
        assert_eq!(ActionRef::parse("a/b@4.1.2").ref_kind, RefKind::Tag);
        assert_eq!(ActionRef::parse("a/b@release/v1").ref_kind, RefKind::Branch);
        assert_eq!(ActionRef::parse("freecodecamp/crowdin-action@main").ref_kind, RefKind::Branch);
        assert_eq!(ActionRef::parse("a/b@master").ref_kind, RefKind::Branch);
        assert_eq!(ActionRef::parse("a/b@some-feature").ref_kind, RefKind::Unknown);
        assert_eq!(ActionRef::parse("a/b").ref_kind, RefKind::Unknown);
    }

    #[test]
    fn local_and_docker_forms() {
        let local = ActionRef::parse("./.github/actions/my-action");
        assert_eq!(local.ref_kind, RefKind::Local);
        assert_eq!(local.owner, None);

        let docker = ActionRef::parse("docker://alpine:3.19");
        assert_eq!(docker.ref_kind, RefKind::Docker);
        assert!(!docker.is_digest_pinned());
        assert!(ActionRef::parse(
            "docker://alpine@sha256:1304f174557314a7ed9eddb4eab12fed12cb0cd9809e4c28f29af86979a3c870"
        )
        .is_digest_pinned());
    }

    #[test]
    fn subpaths_are_split_out() {
        let r = ActionRef::parse("github/codeql-action/analyze@v3");
        assert_eq!(r.owner.as_deref(), Some("github"));
        assert_eq!(r.repo.as_deref(), Some("codeql-action"));
        assert_eq!(r.subpath.as_deref(), Some("analyze"));
        assert_eq!(r.slug().as_deref(), Some("github/codeql-action"));
        assert_eq!(r.ref_name.as_deref(), Some("v3"));
    }
}
