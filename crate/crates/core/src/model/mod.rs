//! Typed, span-preserving model of one workflow file.
//!
//! [`parse_workflow`] turns raw bytes into a [`WorkflowDoc`] that all
//! detectors consume. Parsing never mutates the source: the model holds the
//! original bytes and every node points back into them. Structural problems
//! that do not prevent modeling (unknown keys, duplicate keys, missing jobs)
//! are collected into a [`ParseReport`] for the runner-compatibility
//! detector rather than failing the parse.

mod action_ref;

pub use action_ref::{ActionRef, RefKind};

/// True when `text` is exactly 40 lowercase hex characters.
pub fn is_full_sha_str(text: &str) -> bool {
    action_ref::is_full_sha(text)
}

use indexmap::IndexMap;
use once_cell::sync::Lazy;
use regex::Regex;
use serde::Serialize;

use crate::span::{LineIndex, SourceSpan};
use crate::yaml::{parse_yaml, ScalarStyle, YamlNode, YamlValue};

/// Fixed GitHub permission-scope vocabulary.
pub const PERMISSION_SCOPES: &[&str] = &[
    "contents",
    "pull-requests",
    "issues",
    "id-token",
    "packages",
    "actions",
    "checks",
    "deployments",
    "security-events",
    "statuses",
    "pages",
    "discussions",
    "attestations",
];

const WORKFLOW_KEYS: &[&str] = &[
    "name",
    "run-name",
    "on",
    "permissions",
    "env",
    "defaults",
    "concurrency",
    "jobs",
];

const JOB_KEYS: &[&str] = &[
    "name",
    "permissions",
    "needs",
    "if",
    "runs-on",
    "environment",
    "concurrency",
    "outputs",
    "env",
    "defaults",
    "steps",
    "timeout-minutes",
    "strategy",
    "continue-on-error",
    "container",
    "services",
    "uses",
    "with",
    "secrets",
];

const STEP_KEYS: &[&str] = &[
    "id",
    "if",
    "name",
    "uses",
    "run",
    "with",
    "working-directory",
    "shell",
    "env",
    "continue-on-error",
    "timeout-minutes",
];

/// One `key: value` entry with spans for both sides.
#[derive(Debug, Clone)]
pub struct EnvEntry {
    pub value: String,
    pub key_span: SourceSpan,
    pub value_span: SourceSpan,
    pub value_style: ScalarStyle,
}

pub type EnvMap = IndexMap<String, EnvEntry>;

#[derive(Debug, Clone)]
pub struct Trigger {
    /// Event name, normalized to lowercase (`push`, `pull_request_target`, ...).
    pub event: String,
    /// Event filters (`types`, `branches`, `inputs`, ...), kept as raw YAML.
    pub filters: IndexMap<String, YamlNode>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Read,
    Write,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PermissionMode {
    /// No `permissions:` key anywhere in scope.
    DefaultImplicit,
    ReadAll,
    WriteAll,
    /// `permissions: {}`.
    NoneAll,
    Scoped(IndexMap<String, Access>),
}

#[derive(Debug, Clone)]
pub struct PermissionSet {
    pub mode: PermissionMode,
    pub span: SourceSpan,
}

impl PermissionSet {
    /// Scopes granted write access, for `write-all` every known scope.
    pub fn write_scopes(&self) -> Vec<String> {
        match &self.mode {
            PermissionMode::WriteAll => vec!["write-all".to_string()],
            PermissionMode::Scoped(map) => map
                .iter()
                .filter(|(_, a)| **a == Access::Write)
                .map(|(s, _)| s.clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn grants_any_write(&self) -> bool {
        matches!(self.mode, PermissionMode::WriteAll) || !self.write_scopes().is_empty()
    }
}

/// YAML scalar style of an `if:` value, which decides how the runner
/// ultimately sees the condition string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStyle {
    Plain,
    FoldedBlock,
    LiteralBlock,
    Quoted,
}

#[derive(Debug, Clone)]
pub struct RawCondition {
    /// The rendered scalar value (block scalars folded per YAML rules).
    pub text: String,
    pub scalar_style: ConditionStyle,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct ContainerSpec {
    pub image: Option<EnvEntry>,
    /// `credentials:` entries (`username`, `password`).
    pub credentials: Vec<(String, EnvEntry)>,
    pub env: EnvMap,
    pub span: SourceSpan,
    /// The raw YAML subtree for generic scanning.
    pub raw: YamlNode,
}

#[derive(Debug, Clone)]
pub struct UsesEntry {
    pub action: ActionRef,
    /// Span of the `uses:` value in the source.
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub enum StepKind {
    Run {
        /// Rendered script text.
        script: String,
        script_span: SourceSpan,
        script_style: ScalarStyle,
        shell: Option<String>,
    },
    Uses {
        uses: UsesEntry,
        with: EnvMap,
    },
}

#[derive(Debug, Clone)]
pub struct Step {
    pub index: usize,
    pub name: Option<String>,
    pub kind: StepKind,
    pub env: EnvMap,
    pub condition: Option<RawCondition>,
    pub continue_on_error: bool,
    pub span: SourceSpan,
}

impl Step {
    pub fn uses(&self) -> Option<&UsesEntry> {
        match &self.kind {
            StepKind::Uses { uses, .. } => Some(uses),
            _ => None,
        }
    }

    pub fn run_script(&self) -> Option<(&str, SourceSpan)> {
        match &self.kind {
            StepKind::Run {
                script, script_span, ..
            } => Some((script.as_str(), *script_span)),
            _ => None,
        }
    }

    pub fn with_map(&self) -> Option<&EnvMap> {
        match &self.kind {
            StepKind::Uses { with, .. } => Some(with),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SecretsMode {
    None,
    Explicit(EnvMap),
    Inherit { span: SourceSpan },
}

#[derive(Debug, Clone)]
pub struct NeedRef {
    pub id: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct RunnerLabel {
    pub label: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub id: String,
    pub id_span: SourceSpan,
    pub name: Option<String>,
    pub runs_on: Vec<RunnerLabel>,
    pub permissions: Option<PermissionSet>,
    pub container: Option<ContainerSpec>,
    pub services: IndexMap<String, ContainerSpec>,
    pub steps: Vec<Step>,
    /// Set for `jobs.<id>.uses:` reusable-workflow calls.
    pub reusable_call: Option<UsesEntry>,
    pub secrets_mode: SecretsMode,
    pub condition: Option<RawCondition>,
    pub needs: Vec<NeedRef>,
    pub env: EnvMap,
    pub span: SourceSpan,
}

/// A key the model did not recognize, kept for compatibility analysis.
#[derive(Debug, Clone)]
pub struct UnknownKey {
    /// Where the key appeared: `workflow`, `job(<id>)`, or `step`.
    pub context: String,
    pub key: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct WorkflowDoc {
    pub path: String,
    pub name: Option<String>,
    pub triggers: Vec<Trigger>,
    pub permissions: Option<PermissionSet>,
    pub env: EnvMap,
    pub jobs: IndexMap<String, Job>,
    /// The complete original source. Never mutated by the model.
    pub source: String,
    /// Span of the root mapping.
    pub span: SourceSpan,
    /// Span of the `jobs:` key, used as the anchor for workflow-level findings.
    pub jobs_key_span: Option<SourceSpan>,
    pub unknown_keys: Vec<UnknownKey>,
}

impl WorkflowDoc {
    pub fn has_trigger(&self, event: &str) -> bool {
        self.triggers.iter().any(|t| t.event == event)
    }

    pub fn trigger(&self, event: &str) -> Option<&Trigger> {
        self.triggers.iter().find(|t| t.event == event)
    }

    /// Effective permissions for a job: job-level overrides workflow-level.
    pub fn effective_permissions(&self, job: &Job) -> PermissionMode {
        job.permissions
            .as_ref()
            .or(self.permissions.as_ref())
            .map(|p| p.mode.clone())
            .unwrap_or(PermissionMode::DefaultImplicit)
    }

    pub fn line_index(&self) -> LineIndex {
        LineIndex::new(&self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Syntax,
    MissingJobs,
    UnknownKey,
    DuplicateKey,
    BadStructure,
    BadPermissionScope,
    StepShape,
    BadJobId,
}

#[derive(Debug, Clone)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub message: String,
    pub span: SourceSpan,
}

/// Structural observations from parsing, consumed by detectors.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub anomalies: Vec<Anomaly>,
}

impl ParseReport {
    fn push(&mut self, kind: AnomalyKind, message: impl Into<String>, span: SourceSpan) {
        self.anomalies.push(Anomaly {
            kind,
            message: message.into(),
            span,
        });
    }
}

#[derive(Debug)]
pub struct ParsedWorkflow {
    pub doc: WorkflowDoc,
    pub report: ParseReport,
}

/// Fatal parse failures. Structural problems short of these produce a
/// [`ParseReport`] instead.
#[derive(Debug, thiserror::Error)]
pub enum ParseFailure {
    #[error("{path}: input is not valid UTF-8 ({detail})")]
    Encoding { path: String, detail: String },
    #[error("{path}: {message} (line {line}, column {col})")]
    Syntax {
        path: String,
        message: String,
        line: usize,
        col: usize,
        report: ParseReport,
    },
}

/// Parse one workflow file into a typed document.
pub fn parse_workflow(source: &[u8], path: &str) -> Result<ParsedWorkflow, ParseFailure> {
    let text = std::str::from_utf8(source).map_err(|e| ParseFailure::Encoding {
        path: path.to_string(),
        detail: e.to_string(),
    })?;
    parse_workflow_str(text, path)
}

pub fn parse_workflow_str(text: &str, path: &str) -> Result<ParsedWorkflow, ParseFailure> {
    let index = LineIndex::new(text);
    let tree = match parse_yaml(text) {
        Ok(tree) => tree,
        Err(err) => {
            let mut report = ParseReport::default();
            let span = index.span(
                text,
                index.line_start(err.line),
                index.line_start(err.line),
            );
            report.push(AnomalyKind::Syntax, err.message.clone(), span);
            return Err(ParseFailure::Syntax {
                path: path.to_string(),
                message: err.message,
                line: err.line,
                col: err.col,
                report,
            });
        }
    };

    let mut report = ParseReport::default();
    for anomaly in &tree.anomalies {
        let kind = if anomaly.message.starts_with("duplicate mapping key") {
            AnomalyKind::DuplicateKey
        } else {
            AnomalyKind::BadStructure
        };
        report.push(kind, anomaly.message.clone(), anomaly.span);
    }

    let builder = ModelBuilder {
        source: text,
        path,
        report: &mut report,
    };
    let doc = builder.build(tree.root.as_ref());
    Ok(ParsedWorkflow { doc, report })
}

struct ModelBuilder<'a> {
    source: &'a str,
    path: &'a str,
    report: &'a mut ParseReport,
}

impl<'a> ModelBuilder<'a> {
    fn build(mut self, root: Option<&YamlNode>) -> WorkflowDoc {
        let mut doc = WorkflowDoc {
            path: self.path.to_string(),
            name: None,
            triggers: Vec::new(),
            permissions: None,
            env: EnvMap::new(),
            jobs: IndexMap::new(),
            source: self.source.to_string(),
            span: root.map(|r| r.span).unwrap_or_else(SourceSpan::zero),
            jobs_key_span: None,
            unknown_keys: Vec::new(),
        };

        let root_map = match root {
            Some(node) => match node.as_map() {
                Some(map) => map,
                None => {
                    self.report.push(
                        AnomalyKind::BadStructure,
                        "workflow root is not a mapping",
                        node.span,
                    );
                    return doc;
                }
            },
            None => {
                self.report.push(
                    AnomalyKind::BadStructure,
                    "empty workflow document",
                    SourceSpan::zero(),
                );
                return doc;
            }
        };

        for (key, key_node, value) in root_map.iter_scalar_keys() {
            match key {
                "name" => doc.name = value.scalar_text().map(str::to_string),
                "on" => doc.triggers = self.parse_triggers(value),
                "permissions" => doc.permissions = self.parse_permissions(value),
                "env" => doc.env = self.parse_env_map(value),
                "jobs" => {
                    doc.jobs_key_span = Some(key_node.span);
                    doc.jobs = self.parse_jobs(value);
                }
                _ if WORKFLOW_KEYS.contains(&key) => {}
                other => {
                    doc.unknown_keys.push(UnknownKey {
                        context: "workflow".to_string(),
                        key: other.to_string(),
                        span: key_node.span,
                    });
                    self.report.push(
                        AnomalyKind::UnknownKey,
                        format!("unknown workflow key `{other}`"),
                        key_node.span,
                    );
                }
            }
        }

        if doc.jobs.is_empty() {
            let span = doc.jobs_key_span.unwrap_or(doc.span);
            self.report
                .push(AnomalyKind::MissingJobs, "workflow defines no jobs", span);
        }
        if doc.triggers.is_empty() {
            self.report.push(
                AnomalyKind::BadStructure,
                "workflow declares no `on:` triggers",
                doc.span,
            );
        }
        doc
    }

    fn parse_triggers(&mut self, node: &YamlNode) -> Vec<Trigger> {
        let mut triggers = Vec::new();
        match &node.value {
            YamlValue::Scalar(s) => triggers.push(Trigger {
                event: s.text.trim().to_ascii_lowercase(),
                filters: IndexMap::new(),
                span: node.span,
            }),
            YamlValue::Seq(items) => {
                for item in items {
                    if let Some(text) = item.scalar_text() {
                        triggers.push(Trigger {
                            event: text.trim().to_ascii_lowercase(),
                            filters: IndexMap::new(),
                            span: item.span,
                        });
                    } else {
                        self.report.push(
                            AnomalyKind::BadStructure,
                            "trigger list entries must be event names",
                            item.span,
                        );
                    }
                }
            }
            YamlValue::Map(map) => {
                for (event, key_node, value) in map.iter_scalar_keys() {
                    let mut filters = IndexMap::new();
                    if let Some(filter_map) = value.as_map() {
                        for (fk, _, fv) in filter_map.iter_scalar_keys() {
                            filters.insert(fk.to_string(), fv.clone());
                        }
                    }
                    triggers.push(Trigger {
                        event: event.trim().to_ascii_lowercase(),
                        filters,
                        span: key_node.span,
                    });
                }
            }
        }
        triggers.retain(|t| {
            if t.event.is_empty() {
                self.report.push(
                    AnomalyKind::BadStructure,
                    "empty trigger event name",
                    t.span,
                );
                false
            } else {
                true
            }
        });
        triggers
    }

    fn parse_permissions(&mut self, node: &YamlNode) -> Option<PermissionSet> {
        let mode = match &node.value {
            YamlValue::Scalar(s) => match s.text.trim() {
                "read-all" => PermissionMode::ReadAll,
                "write-all" => PermissionMode::WriteAll,
                "" => PermissionMode::NoneAll,
                other => {
                    self.report.push(
                        AnomalyKind::BadPermissionScope,
                        format!("unrecognized permissions value `{other}`"),
                        node.span,
                    );
                    return None;
                }
            },
            YamlValue::Map(map) if map.is_empty() => PermissionMode::NoneAll,
            YamlValue::Map(map) => {
                let mut scoped = IndexMap::new();
                for (scope, key_node, value) in map.iter_scalar_keys() {
                    if !PERMISSION_SCOPES.contains(&scope) {
                        self.report.push(
                            AnomalyKind::BadPermissionScope,
                            format!("unknown permission scope `{scope}`"),
                            key_node.span,
                        );
                        continue;
                    }
                    let access = match value.scalar_text().map(str::trim) {
                        Some("read") => Access::Read,
                        Some("write") => Access::Write,
                        Some("none") => Access::None,
                        other => {
                            self.report.push(
                                AnomalyKind::BadPermissionScope,
                                format!(
                                    "invalid access `{}` for scope `{scope}`",
                                    other.unwrap_or("<non-scalar>")
                                ),
                                value.span,
                            );
                            continue;
                        }
                    };
                    scoped.insert(scope.to_string(), access);
                }
                PermissionMode::Scoped(scoped)
            }
            YamlValue::Seq(_) => {
                self.report.push(
                    AnomalyKind::BadPermissionScope,
                    "permissions must be a mapping or read-all/write-all",
                    node.span,
                );
                return None;
            }
        };
        Some(PermissionSet {
            mode,
            span: node.span,
        })
    }

    fn parse_env_map(&mut self, node: &YamlNode) -> EnvMap {
        let mut env = EnvMap::new();
        let Some(map) = node.as_map() else {
            if !node.is_null() {
                self.report.push(
                    AnomalyKind::BadStructure,
                    "expected a mapping of names to values",
                    node.span,
                );
            }
            return env;
        };
        for (key, key_node, value) in map.iter_scalar_keys() {
            match value.scalar() {
                Some(scalar) => {
                    env.insert(
                        key.to_string(),
                        EnvEntry {
                            value: scalar.text.clone(),
                            key_span: key_node.span,
                            value_span: value.span,
                            value_style: scalar.style,
                        },
                    );
                }
                None => self.report.push(
                    AnomalyKind::BadStructure,
                    format!("value of `{key}` must be a scalar"),
                    value.span,
                ),
            }
        }
        env
    }

    fn parse_jobs(&mut self, node: &YamlNode) -> IndexMap<String, Job> {
        let mut jobs = IndexMap::new();
        let Some(map) = node.as_map() else {
            self.report.push(
                AnomalyKind::BadStructure,
                "`jobs` must be a mapping of job ids",
                node.span,
            );
            return jobs;
        };
        for (id, key_node, value) in map.iter_scalar_keys() {
            if !is_valid_job_id(id) {
                self.report.push(
                    AnomalyKind::BadJobId,
                    format!("invalid job id `{id}`"),
                    key_node.span,
                );
            }
            let job = self.parse_job(id, key_node.span, value);
            jobs.insert(id.to_string(), job);
        }
        jobs
    }

    fn parse_job(&mut self, id: &str, id_span: SourceSpan, node: &YamlNode) -> Job {
        let mut job = Job {
            id: id.to_string(),
            id_span,
            name: None,
            runs_on: Vec::new(),
            permissions: None,
            container: None,
            services: IndexMap::new(),
            steps: Vec::new(),
            reusable_call: None,
            secrets_mode: SecretsMode::None,
            condition: None,
            needs: Vec::new(),
            env: EnvMap::new(),
            span: node.span,
        };
        let Some(map) = node.as_map() else {
            self.report.push(
                AnomalyKind::BadStructure,
                format!("job `{id}` is not a mapping"),
                node.span,
            );
            return job;
        };

        for (key, key_node, value) in map.iter_scalar_keys() {
            match key {
                "name" => job.name = value.scalar_text().map(str::to_string),
                "runs-on" => job.runs_on = self.parse_runs_on(value),
                "permissions" => job.permissions = self.parse_permissions(value),
                "container" => job.container = self.parse_container(value),
                "services" => {
                    if let Some(services) = value.as_map() {
                        for (svc, _, spec) in services.iter_scalar_keys() {
                            if let Some(parsed) = self.parse_container(spec) {
                                job.services.insert(svc.to_string(), parsed);
                            }
                        }
                    }
                }
                "steps" => job.steps = self.parse_steps(value),
                "uses" => {
                    if let Some(text) = value.scalar_text() {
                        job.reusable_call = Some(UsesEntry {
                            action: ActionRef::parse(text.trim()),
                            span: value.span,
                        });
                    }
                }
                "secrets" => {
                    job.secrets_mode = if value.scalar_text().map(str::trim) == Some("inherit") {
                        SecretsMode::Inherit { span: value.span }
                    } else if value.as_map().is_some() {
                        SecretsMode::Explicit(self.parse_env_map(value))
                    } else {
                        self.report.push(
                            AnomalyKind::BadStructure,
                            "`secrets` must be `inherit` or a mapping",
                            value.span,
                        );
                        SecretsMode::None
                    };
                }
                "if" => job.condition = self.parse_condition(value),
                "needs" => job.needs = self.parse_needs(value),
                "env" => job.env = self.parse_env_map(value),
                _ if JOB_KEYS.contains(&key) => {}
                other => {
                    self.report.push(
                        AnomalyKind::UnknownKey,
                        format!("unknown key `{other}` in job `{id}`"),
                        key_node.span,
                    );
                }
            }
        }

        let has_steps = !job.steps.is_empty();
        if has_steps && job.reusable_call.is_some() {
            self.report.push(
                AnomalyKind::StepShape,
                format!("job `{id}` mixes `steps` with a reusable workflow call"),
                job.span,
            );
        } else if !has_steps && job.reusable_call.is_none() {
            self.report.push(
                AnomalyKind::StepShape,
                format!("job `{id}` has neither steps nor a reusable workflow call"),
                job.span,
            );
        }
        job
    }

    fn parse_runs_on(&mut self, node: &YamlNode) -> Vec<RunnerLabel> {
        let mut labels = Vec::new();
        match &node.value {
            YamlValue::Scalar(s) => labels.push(RunnerLabel {
                label: s.text.clone(),
                span: node.span,
            }),
            YamlValue::Seq(items) => {
                for item in items {
                    if let Some(text) = item.scalar_text() {
                        labels.push(RunnerLabel {
                            label: text.to_string(),
                            span: item.span,
                        });
                    }
                }
            }
            YamlValue::Map(map) => {
                // `runs-on: { group: ..., labels: [...] }` form.
                if let Some(group_labels) = map.get("labels") {
                    match &group_labels.value {
                        YamlValue::Scalar(s) => labels.push(RunnerLabel {
                            label: s.text.clone(),
                            span: group_labels.span,
                        }),
                        YamlValue::Seq(items) => {
                            for item in items {
                                if let Some(text) = item.scalar_text() {
                                    labels.push(RunnerLabel {
                                        label: text.to_string(),
                                        span: item.span,
                                    });
                                }
                            }
                        }
                        YamlValue::Map(_) => {}
                    }
                }
            }
        }
        labels
    }

    fn parse_container(&mut self, node: &YamlNode) -> Option<ContainerSpec> {
        if node.is_null() {
            return None;
        }
        let mut spec = ContainerSpec {
            image: None,
            credentials: Vec::new(),
            env: EnvMap::new(),
            span: node.span,
            raw: node.clone(),
        };
        match &node.value {
            YamlValue::Scalar(s) => {
                spec.image = Some(EnvEntry {
                    value: s.text.clone(),
                    key_span: node.span,
                    value_span: node.span,
                    value_style: s.style,
                });
            }
            YamlValue::Map(map) => {
                if let Some(image) = map.get("image") {
                    if let Some(scalar) = image.scalar() {
                        spec.image = Some(EnvEntry {
                            value: scalar.text.clone(),
                            key_span: image.span,
                            value_span: image.span,
                            value_style: scalar.style,
                        });
                    }
                }
                if let Some(creds) = map.get("credentials").and_then(YamlNode::as_map) {
                    for (field, key_node, value) in creds.iter_scalar_keys() {
                        if let Some(scalar) = value.scalar() {
                            spec.credentials.push((
                                field.to_string(),
                                EnvEntry {
                                    value: scalar.text.clone(),
                                    key_span: key_node.span,
                                    value_span: value.span,
                                    value_style: scalar.style,
                                },
                            ));
                        }
                    }
                }
                if let Some(env) = map.get("env") {
                    spec.env = self.parse_env_map(env);
                }
            }
            YamlValue::Seq(_) => {
                self.report.push(
                    AnomalyKind::BadStructure,
                    "container must be an image name or a mapping",
                    node.span,
                );
                return None;
            }
        }
        Some(spec)
    }

    fn parse_steps(&mut self, node: &YamlNode) -> Vec<Step> {
        let Some(items) = node.as_seq() else {
            self.report.push(
                AnomalyKind::BadStructure,
                "`steps` must be a sequence",
                node.span,
            );
            return Vec::new();
        };
        let mut steps = Vec::new();
        for (index, item) in items.iter().enumerate() {
            if let Some(step) = self.parse_step(index, item) {
                steps.push(step);
            }
        }
        steps
    }

    fn parse_step(&mut self, index: usize, node: &YamlNode) -> Option<Step> {
        let Some(map) = node.as_map() else {
            self.report.push(
                AnomalyKind::BadStructure,
                "step entries must be mappings",
                node.span,
            );
            return None;
        };

        let mut name = None;
        let mut run: Option<(&YamlNode, String)> = None;
        let mut uses: Option<&YamlNode> = None;
        let mut with = EnvMap::new();
        let mut env = EnvMap::new();
        let mut condition = None;
        let mut continue_on_error = false;
        let mut shell = None;

        for (key, key_node, value) in map.iter_scalar_keys() {
            match key {
                "name" => name = value.scalar_text().map(str::to_string),
                "run" => {
                    if let Some(scalar) = value.scalar() {
                        run = Some((value, scalar.text.clone()));
                    }
                }
                "uses" => uses = Some(value),
                "with" => with = self.parse_env_map(value),
                "env" => env = self.parse_env_map(value),
                "if" => condition = self.parse_condition(value),
                "shell" => shell = value.scalar_text().map(str::to_string),
                "continue-on-error" => {
                    continue_on_error = value.as_bool().unwrap_or(false);
                }
                _ if STEP_KEYS.contains(&key) => {}
                other => {
                    self.report.push(
                        AnomalyKind::UnknownKey,
                        format!("unknown step key `{other}`"),
                        key_node.span,
                    );
                }
            }
        }

        let kind = match (run, uses) {
            (Some((script_node, script)), None) => StepKind::Run {
                script,
                script_span: script_node.span,
                script_style: script_node.scalar().map(|s| s.style).unwrap_or(ScalarStyle::Plain),
                shell,
            },
            (None, Some(uses_node)) => {
                let text = uses_node.scalar_text().unwrap_or_default().trim().to_string();
                StepKind::Uses {
                    uses: UsesEntry {
                        action: ActionRef::parse(&text),
                        span: uses_node.span,
                    },
                    with,
                }
            }
            (Some((script_node, script)), Some(_)) => {
                self.report.push(
                    AnomalyKind::StepShape,
                    "step declares both `run` and `uses`",
                    node.span,
                );
                StepKind::Run {
                    script,
                    script_span: script_node.span,
                    script_style: script_node
                        .scalar()
                        .map(|s| s.style)
                        .unwrap_or(ScalarStyle::Plain),
                    shell,
                }
            }
            (None, None) => {
                self.report.push(
                    AnomalyKind::StepShape,
                    "step declares neither `run` nor `uses`",
                    node.span,
                );
                return None;
            }
        };

        Some(Step {
            index,
            name,
            kind,
            env,
            condition,
            continue_on_error,
            span: node.span,
        })
    }

    fn parse_condition(&mut self, node: &YamlNode) -> Option<RawCondition> {
        let scalar = match node.scalar() {
            Some(s) => s,
            None => {
                self.report.push(
                    AnomalyKind::BadStructure,
                    "`if` condition must be a scalar",
                    node.span,
                );
                return None;
            }
        };
        let style = match scalar.style {
            ScalarStyle::Plain => ConditionStyle::Plain,
            ScalarStyle::Folded => ConditionStyle::FoldedBlock,
            ScalarStyle::Literal => ConditionStyle::LiteralBlock,
            ScalarStyle::SingleQuoted | ScalarStyle::DoubleQuoted => ConditionStyle::Quoted,
        };
        Some(RawCondition {
            text: scalar.text.clone(),
            scalar_style: style,
            span: node.span,
        })
    }

    fn parse_needs(&mut self, node: &YamlNode) -> Vec<NeedRef> {
        let mut needs = Vec::new();
        let mut add = |text: &str, span: SourceSpan, report: &mut ParseReport| {
            let id = text.trim();
            if is_valid_job_id(id) {
                needs.push(NeedRef {
                    id: id.to_string(),
                    span,
                });
            } else {
                report.push(
                    AnomalyKind::BadJobId,
                    format!("`needs` entry `{id}` is not a valid job id"),
                    span,
                );
            }
        };
        match &node.value {
            YamlValue::Scalar(s) => add(&s.text, node.span, self.report),
            YamlValue::Seq(items) => {
                for item in items {
                    if let Some(text) = item.scalar_text() {
                        add(text, item.span, self.report);
                    }
                }
            }
            YamlValue::Map(_) => self.report.push(
                AnomalyKind::BadStructure,
                "`needs` must be a job id or list of job ids",
                node.span,
            ),
        }
        needs
    }
}

fn is_valid_job_id(id: &str) -> bool {
    let mut bytes = id.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

static COMMENTED_USES: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r#"^\s*#+\s*(?:-\s*)?uses:\s*["']?([^\s"'#]+)"#).expect("valid regex")
});

/// All `uses:` targets in the document: step actions and reusable-workflow
/// calls, optionally including refs recovered from commented-out lines.
/// Results are ordered by source position.
pub fn list_action_refs(doc: &WorkflowDoc, include_commented: bool) -> Vec<(ActionRef, SourceSpan)> {
    let mut refs = Vec::new();
    for job in doc.jobs.values() {
        if let Some(call) = &job.reusable_call {
            refs.push((call.action.clone(), call.span));
        }
        for step in &job.steps {
            if let Some(uses) = step.uses() {
                refs.push((uses.action.clone(), uses.span));
            }
        }
    }

    if include_commented {
        let index = doc.line_index();
        let mut offset = 0usize;
        for line in doc.source.split_inclusive('\n') {
            if let Some(caps) = COMMENTED_USES.captures(line.trim_end_matches('\n')) {
                let m = caps.get(1).expect("group 1");
                let start = offset + m.start();
                let end = offset + m.end();
                let mut action = ActionRef::parse(m.as_str());
                action.commented_out = true;
                refs.push((action, index.span(&doc.source, start, end)));
            }
            offset += line.len();
        }
    }

    refs.sort_by_key(|(_, span)| (span.start_byte, span.end_byte));
    refs
}
