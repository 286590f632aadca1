//! Span-preserving YAML loader.
//!
//! Workflows are modeled from a YAML node tree in which every scalar,
//! sequence, and mapping keeps its byte span in the original source. The
//! loader expands anchors/aliases at the use site (detectors reason about
//! effective configuration), records duplicate mapping keys as anomalies
//! instead of failing, and preserves the scalar style so condition analysis
//! can distinguish plain, quoted, and block scalars.

use saphyr_parser::{Event, Parser, ScanError, Span as SaphyrSpan, SpannedEventReceiver};
use serde::Serialize;

use crate::span::{LineIndex, SourceSpan};

/// Cap on total nodes after alias expansion, so hostile inputs with nested
/// anchors cannot balloon memory.
const MAX_NODES: usize = 1_000_000;

/// How a scalar was written in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarStyle {
    Plain,
    SingleQuoted,
    DoubleQuoted,
    /// `|` block scalar.
    Literal,
    /// `>` block scalar.
    Folded,
}

impl ScalarStyle {
    pub fn is_block(self) -> bool {
        matches!(self, ScalarStyle::Literal | ScalarStyle::Folded)
    }

    pub fn is_quoted(self) -> bool {
        matches!(self, ScalarStyle::SingleQuoted | ScalarStyle::DoubleQuoted)
    }
}

#[derive(Debug, Clone)]
pub struct YamlScalar {
    /// The rendered scalar value (quotes stripped, block scalars folded).
    pub text: String,
    pub style: ScalarStyle,
}

#[derive(Debug, Clone, Default)]
pub struct YamlMap {
    /// Entries in document order, duplicates included.
    pub entries: Vec<(YamlNode, YamlNode)>,
}

impl YamlMap {
    /// Last entry whose key scalar equals `key` (duplicate keys resolve to
    /// the final writer, matching how most YAML consumers behave).
    pub fn get(&self, key: &str) -> Option<&YamlNode> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k.scalar_text() == Some(key))
            .map(|(_, v)| v)
    }

    pub fn key_node(&self, key: &str) -> Option<&YamlNode> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k.scalar_text() == Some(key))
            .map(|(k, _)| k)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterate entries whose keys are scalars, yielding (key text, key node, value node).
    pub fn iter_scalar_keys(&self) -> impl Iterator<Item = (&str, &YamlNode, &YamlNode)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.scalar_text().map(|t| (t, k, v)))
    }
}

#[derive(Debug, Clone)]
pub enum YamlValue {
    Scalar(YamlScalar),
    Seq(Vec<YamlNode>),
    Map(YamlMap),
}

#[derive(Debug, Clone)]
pub struct YamlNode {
    pub value: YamlValue,
    pub span: SourceSpan,
}

impl YamlNode {
    pub fn scalar_text(&self) -> Option<&str> {
        match &self.value {
            YamlValue::Scalar(s) => Some(&s.text),
            _ => None,
        }
    }

    pub fn scalar(&self) -> Option<&YamlScalar> {
        match &self.value {
            YamlValue::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&YamlMap> {
        match &self.value {
            YamlValue::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[YamlNode]> {
        match &self.value {
            YamlValue::Seq(s) => Some(s),
            _ => None,
        }
    }

    /// True for YAML null values (`~`, `null`, or an empty plain scalar).
    pub fn is_null(&self) -> bool {
        match &self.value {
            YamlValue::Scalar(s) => {
                s.style == ScalarStyle::Plain
                    && matches!(s.text.as_str(), "" | "~" | "null" | "Null" | "NULL")
            }
            _ => false,
        }
    }

    /// Scalar text interpreted as a YAML 1.2 boolean, when it is one.
    pub fn as_bool(&self) -> Option<bool> {
        match self.scalar()?.text.as_str() {
            "true" | "True" | "TRUE" => Some(true),
            "false" | "False" | "FALSE" => Some(false),
            _ => None,
        }
    }

    /// All scalar nodes in this subtree, depth-first.
    pub fn walk_scalars(&self) -> Vec<&YamlNode> {
        let mut out = Vec::new();
        self.collect_scalars(&mut out);
        out
    }

    fn collect_scalars<'a>(&'a self, out: &mut Vec<&'a YamlNode>) {
        match &self.value {
            YamlValue::Scalar(_) => out.push(self),
            YamlValue::Seq(items) => {
                for item in items {
                    item.collect_scalars(out);
                }
            }
            YamlValue::Map(m) => {
                for (_, v) in &m.entries {
                    v.collect_scalars(out);
                }
            }
        }
    }

    fn count_nodes(&self) -> usize {
        match &self.value {
            YamlValue::Scalar(_) => 1,
            YamlValue::Seq(items) => 1 + items.iter().map(YamlNode::count_nodes).sum::<usize>(),
            YamlValue::Map(m) => {
                1 + m
                    .entries
                    .iter()
                    .map(|(k, v)| k.count_nodes() + v.count_nodes())
                    .sum::<usize>()
            }
        }
    }

    fn retarget_spans(&mut self, span: SourceSpan) {
        self.span = span;
        match &mut self.value {
            YamlValue::Scalar(_) => {}
            YamlValue::Seq(items) => {
                for item in items {
                    item.retarget_spans(span);
                }
            }
            YamlValue::Map(m) => {
                for (k, v) in &mut m.entries {
                    k.retarget_spans(span);
                    v.retarget_spans(span);
                }
            }
        }
    }
}

/// A non-fatal structural observation made while loading.
#[derive(Debug, Clone)]
pub struct YamlAnomaly {
    pub message: String,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub struct YamlTree {
    /// Root node of the first document, absent for an empty stream.
    pub root: Option<YamlNode>,
    pub anomalies: Vec<YamlAnomaly>,
}

/// A YAML syntax failure: the document could not be loaded at all.
#[derive(Debug, Clone, thiserror::Error)]
#[error("YAML syntax error at line {line}, column {col}: {message}")]
pub struct YamlSyntaxError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

/// Load the first YAML document of `source` into a span-preserving tree.
pub fn parse_yaml(source: &str) -> Result<YamlTree, YamlSyntaxError> {
    let index = LineIndex::new(source);
    let chars = CharToByte::new(source);
    let mut builder = TreeBuilder {
        source,
        index: &index,
        chars: &chars,
        stack: Vec::new(),
        docs: Vec::new(),
        anchors: Vec::new(),
        anomalies: Vec::new(),
        node_budget: MAX_NODES,
        overflow: false,
    };
    let mut parser = Parser::new_from_str(source);
    let result = parser.load(&mut builder, true);

    if builder.overflow {
        return Err(YamlSyntaxError {
            message: "document exceeds the node budget after alias expansion".into(),
            line: 1,
            col: 1,
        });
    }
    if let Err(err) = result {
        return Err(scan_error_to_syntax(&err));
    }

    let mut docs = builder.docs;
    let mut anomalies = builder.anomalies;
    if docs.len() > 1 {
        for extra in &docs[1..] {
            anomalies.push(YamlAnomaly {
                message: "multiple YAML documents in one file; only the first is analyzed".into(),
                span: extra.span,
            });
        }
    }
    let root = if docs.is_empty() {
        None
    } else {
        Some(docs.swap_remove(0))
    };
    Ok(YamlTree { root, anomalies })
}

fn scan_error_to_syntax(err: &ScanError) -> YamlSyntaxError {
    let marker = err.marker();
    YamlSyntaxError {
        message: err.info().to_string(),
        line: marker.line(),
        col: marker.col() + 1,
    }
}

/// saphyr markers index the input in characters; workflows may contain
/// multi-byte text (names, comments), so offsets are remapped to bytes.
struct CharToByte {
    table: Option<Vec<usize>>,
    len: usize,
}

impl CharToByte {
    fn new(source: &str) -> Self {
        if source.is_ascii() {
            return Self {
                table: None,
                len: source.len(),
            };
        }
        let mut table: Vec<usize> = source.char_indices().map(|(b, _)| b).collect();
        table.push(source.len());
        Self {
            table: Some(table),
            len: source.len(),
        }
    }

    fn byte(&self, char_idx: usize) -> usize {
        match &self.table {
            None => char_idx.min(self.len),
            Some(t) => t.get(char_idx).copied().unwrap_or(self.len),
        }
    }
}

enum Container {
    Map {
        entries: Vec<(YamlNode, YamlNode)>,
        pending_key: Option<YamlNode>,
        start: usize,
        anchor: usize,
    },
    Seq {
        items: Vec<YamlNode>,
        start: usize,
        anchor: usize,
    },
}

struct TreeBuilder<'a> {
    source: &'a str,
    index: &'a LineIndex,
    chars: &'a CharToByte,
    stack: Vec<Container>,
    docs: Vec<YamlNode>,
    anchors: Vec<(usize, YamlNode)>,
    anomalies: Vec<YamlAnomaly>,
    node_budget: usize,
    overflow: bool,
}

impl<'a> TreeBuilder<'a> {
    fn make_span(&self, span: SaphyrSpan) -> SourceSpan {
        let start = self.chars.byte(span.start.index());
        let mut end = self.chars.byte(span.end.index()).max(start);
        // Block collection end events point at the next token; trim the
        // trailing whitespace so container spans end at real content.
        let bytes = self.source.as_bytes();
        while end > start && bytes[end - 1].is_ascii_whitespace() {
            end -= 1;
        }
        self.index.span(self.source, start, end)
    }

    fn attach(&mut self, node: YamlNode, anchor: usize) {
        if self.node_budget == 0 {
            self.overflow = true;
            return;
        }
        self.node_budget -= 1;
        if anchor != 0 {
            let cost = node.count_nodes();
            self.node_budget = self.node_budget.saturating_sub(cost);
            self.anchors.push((anchor, node.clone()));
        }
        match self.stack.last_mut() {
            None => self.docs.push(node),
            Some(Container::Seq { items, .. }) => items.push(node),
            Some(Container::Map {
                entries,
                pending_key,
                ..
            }) => match pending_key.take() {
                None => *pending_key = Some(node),
                Some(key) => {
                    if let Some(key_text) = key.scalar_text() {
                        if entries
                            .iter()
                            .any(|(k, _)| k.scalar_text() == Some(key_text))
                        {
                            self.anomalies.push(YamlAnomaly {
                                message: format!("duplicate mapping key `{key_text}`"),
                                span: key.span,
                            });
                        }
                    }
                    entries.push((key, node));
                }
            },
        }
    }

    fn resolve_alias(&mut self, anchor: usize, span: SourceSpan) -> YamlNode {
        match self.anchors.iter().rev().find(|(id, _)| *id == anchor) {
            Some((_, node)) => {
                let mut cloned = node.clone();
                let cost = cloned.count_nodes();
                if cost > self.node_budget {
                    self.overflow = true;
                }
                cloned.retarget_spans(span);
                cloned
            }
            None => {
                self.anomalies.push(YamlAnomaly {
                    message: "alias refers to an unknown anchor".into(),
                    span,
                });
                YamlNode {
                    value: YamlValue::Scalar(YamlScalar {
                        text: String::new(),
                        style: ScalarStyle::Plain,
                    }),
                    span,
                }
            }
        }
    }
}

impl<'input, 'a> SpannedEventReceiver<'input> for TreeBuilder<'a> {
    fn on_event(&mut self, ev: Event<'input>, span: SaphyrSpan) {
        if self.overflow {
            return;
        }
        match ev {
            Event::Nothing
            | Event::StreamStart
            | Event::StreamEnd
            | Event::DocumentStart(_)
            | Event::DocumentEnd => {}
            Event::Scalar(value, style, anchor, _tag) => {
                let style = match style {
                    saphyr_parser::ScalarStyle::Plain => ScalarStyle::Plain,
                    saphyr_parser::ScalarStyle::SingleQuoted => ScalarStyle::SingleQuoted,
                    saphyr_parser::ScalarStyle::DoubleQuoted => ScalarStyle::DoubleQuoted,
                    saphyr_parser::ScalarStyle::Literal => ScalarStyle::Literal,
                    saphyr_parser::ScalarStyle::Folded => ScalarStyle::Folded,
                };
                let node = YamlNode {
                    value: YamlValue::Scalar(YamlScalar {
                        text: value.into_owned(),
                        style,
                    }),
                    span: self.make_span(span),
                };
                self.attach(node, anchor);
            }
            Event::Alias(anchor) => {
                let use_site = self.make_span(span);
                let node = self.resolve_alias(anchor, use_site);
                self.attach(node, 0);
            }
            Event::SequenceStart(anchor, _tag) => {
                self.stack.push(Container::Seq {
                    items: Vec::new(),
                    start: self.chars.byte(span.start.index()),
                    anchor,
                });
            }
            Event::SequenceEnd => {
                if let Some(Container::Seq {
                    items,
                    start,
                    anchor,
                }) = self.stack.pop()
                {
                    let end = self.trimmed_end(start, span);
                    let node = YamlNode {
                        value: YamlValue::Seq(items),
                        span: self.index.span(self.source, start, end),
                    };
                    self.attach(node, anchor);
                }
            }
            Event::MappingStart(anchor, _tag) => {
                self.stack.push(Container::Map {
                    entries: Vec::new(),
                    pending_key: None,
                    start: self.chars.byte(span.start.index()),
                    anchor,
                });
            }
            Event::MappingEnd => {
                if let Some(Container::Map {
                    entries,
                    pending_key,
                    start,
                    anchor,
                }) = self.stack.pop()
                {
                    if let Some(key) = pending_key {
                        self.anomalies.push(YamlAnomaly {
                            message: "mapping key without a value".into(),
                            span: key.span,
                        });
                    }
                    let end = self.trimmed_end(start, span);
                    let node = YamlNode {
                        value: YamlValue::Map(YamlMap { entries }),
                        span: self.index.span(self.source, start, end),
                    };
                    self.attach(node, anchor);
                }
            }
        }
    }
}

impl<'a> TreeBuilder<'a> {
    fn trimmed_end(&self, start: usize, end_span: SaphyrSpan) -> usize {
        let mut end = self.chars.byte(end_span.end.index()).max(start);
        let bytes = self.source.as_bytes();
        while end > start && bytes[end - 1].is_ascii_whitespace() {
            end -= 1;
        }
        end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> YamlTree {
        parse_yaml(src).expect("valid yaml")
    }

    #[test]
    fn scalar_spans_point_at_source() {
        let src = "on: push\njobs:\n  build:\n    steps:\n      - uses: actions/checkout@v3\n";
        let tree = parse(src);
        let root = tree.root.unwrap();
        let map = root.as_map().unwrap();
        let jobs = map.get("jobs").unwrap().as_map().unwrap();
        let steps = jobs.get("build").unwrap().as_map().unwrap();
        let uses = steps.get("steps").unwrap().as_seq().unwrap()[0]
            .as_map()
            .unwrap()
            .get("uses")
            .unwrap();
        assert_eq!(uses.scalar_text(), Some("actions/checkout@v3"));
        assert_eq!(uses.span.slice(src), "actions/checkout@v3");
        assert_eq!(uses.span.start_line, 5);
    }

    #[test]
    fn non_ascii_sources_keep_byte_accurate_spans() {
        let src = "name: \"héllo ✓ wörld\"\non: push\njobs:\n  a:\n    uses: owner/repo@v1\n";
        let tree = parse(src);
        let root = tree.root.unwrap();
        let uses = root
            .as_map()
            .unwrap()
            .get("jobs")
            .unwrap()
            .as_map()
            .unwrap()
            .get("a")
            .unwrap()
            .as_map()
            .unwrap()
            .get("uses")
            .unwrap();
        assert_eq!(uses.span.slice(src), "owner/repo@v1");
    }

    #[test]
    fn aliases_expand_at_use_site() {
        let src = "defaults: &d\n  retries: 3\njobs:\n  a: *d\n";
        let tree = parse(src);
        let root = tree.root.unwrap();
        let a = root
            .as_map()
            .unwrap()
            .get("jobs")
            .unwrap()
            .as_map()
            .unwrap()
            .get("a")
            .unwrap();
        let map = a.as_map().unwrap();
        assert_eq!(map.get("retries").unwrap().scalar_text(), Some("3"));
        // Span points at the alias use, not the anchor definition.
        assert_eq!(a.span.start_line, 4);
        assert_eq!(a.span.slice(src), "*d");
    }

    #[test]
    fn duplicate_keys_are_reported_and_last_writer_wins() {
        let src = "env:\n  A: one\n  A: two\n";
        let tree = parse(src);
        assert_eq!(tree.anomalies.len(), 1);
        assert!(tree.anomalies[0].message.contains("duplicate mapping key `A`"));
        let root = tree.root.unwrap();
        let env = root.as_map().unwrap().get("env").unwrap().as_map().unwrap();
        assert_eq!(env.get("A").unwrap().scalar_text(), Some("two"));
        assert_eq!(env.len(), 2);
    }

    #[test]
    fn block_scalar_styles_are_preserved() {
        let src = "a: >\n  folded text\nb: |\n  literal text\nc: 'sq'\nd: \"dq\"\ne: plain\n";
        let tree = parse(src);
        let root = tree.root.unwrap();
        let map = root.as_map().unwrap();
        let style = |k: &str| map.get(k).unwrap().scalar().unwrap().style;
        assert_eq!(style("a"), ScalarStyle::Folded);
        assert_eq!(style("b"), ScalarStyle::Literal);
        assert_eq!(style("c"), ScalarStyle::SingleQuoted);
        assert_eq!(style("d"), ScalarStyle::DoubleQuoted);
        assert_eq!(style("e"), ScalarStyle::Plain);
        assert_eq!(
            map.get("a").unwrap().scalar_text(),
            Some("folded text\n"),
        );
    }

    #[test]
    fn syntax_errors_surface_with_location() {
        let err = parse_yaml("a: [unclosed\n").unwrap_err();
        assert!(err.line >= 1);
        assert!(!err.message.is_empty());
    }

    #[test]
    fn empty_document_yields_no_root() {
        let tree = parse("");
        assert!(tree.root.is_none());
    }

    #[test]
    fn container_spans_cover_their_content() {
        let src = "jobs:\n  one:\n    runs-on: ubuntu-latest\n  two:\n    runs-on: macos-latest\n";
        let tree = parse(src);
        let root = tree.root.unwrap();
        let jobs = root.as_map().unwrap().get("jobs").unwrap();
        let slice = jobs.span.slice(src);
        assert!(slice.starts_with("one:"));
        assert!(slice.ends_with("macos-latest"));
    }
}
