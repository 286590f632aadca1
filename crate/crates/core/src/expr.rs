//! GitHub `${{ ... }}` expression handling.
//!
//! Three concerns live here: locating expression delimiters in text,
//! parsing the expression grammar into an AST with context-path collection,
//! and deciding what a condition string statically evaluates to. The
//! truthiness rules follow the runner's behavior: a condition that is
//! exactly one expression is evaluated as that expression, while a
//! condition with any other characters around the delimiters is expanded as
//! a template whose (non-empty) string result is truthy. Block scalars pick
//! up a trailing newline from YAML, which is exactly how an apparently
//! boolean condition becomes always-true.

use serde::Serialize;

use crate::model::{ConditionStyle, RawCondition};
use crate::span::SourceSpan;

/// Trust classification for an expression, based on its context paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trust {
    /// At least one context is attacker-influenceable.
    Untrusted,
    /// Neither provably attacker-controlled nor repository-controlled.
    Conditional,
    /// Every context is repository-controlled.
    Trusted,
}

/// Expression AST. Unknown functions parse as opaque calls.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Null,
    Bool(bool),
    Number(f64),
    Str(String),
    Context(ContextPath),
    /// Dynamic index access on a non-context base (e.g. `fromJSON(x)[0]`).
    Index(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Call { name: String, args: Vec<Expr> },
}

/// One segment of a context path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSeg {
    /// `.name` access.
    Name(String),
    /// `.*` object filter.
    Star,
    /// `[expr]` access. Literal indexes render into the dotted form;
    /// dynamic ones render as `*`.
    Index(Box<Expr>),
}

/// A context path such as `github.event.pull_request.title`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPath {
    pub segments: Vec<PathSeg>,
}

impl ContextPath {
    /// Dotted rendering used for trust-list matching; dynamic segments
    /// normalize to `*` so `commits[i].message` matches `commits.*.message`.
    pub fn dotted(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push('.');
            }
            match seg {
                PathSeg::Name(name) => out.push_str(name),
                PathSeg::Star => out.push('*'),
                PathSeg::Index(expr) => match expr.as_ref() {
                    Expr::Str(s) => out.push_str(s),
                    Expr::Number(n) if n.fract() == 0.0 && *n >= 0.0 => {
                        out.push_str(&format!("{}", *n as u64));
                    }
                    _ => out.push('*'),
                },
            }
        }
        out
    }

    pub fn root(&self) -> &str {
        match self.segments.first() {
            Some(PathSeg::Name(name)) => name.as_str(),
            _ => "",
        }
    }
}

impl std::fmt::Display for ContextPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.dotted())
    }
}

/// One `${{ ... }}` occurrence with its parse result and trust class.
#[derive(Debug, Clone)]
pub struct TaintedExpr {
    /// Full occurrence text including delimiters.
    pub raw: String,
    /// Parsed body; `None` when the body does not parse.
    pub ast: Option<Expr>,
    /// Every dotted context path appearing in the AST, in source order.
    pub contexts: Vec<String>,
    pub trust: Trust,
    pub span: SourceSpan,
    /// Set for unterminated or unparseable occurrences.
    pub malformed: Option<String>,
}

/// Byte offsets of one delimiter occurrence within a scanned string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExprMatch {
    /// Offset of `${{`.
    pub start: usize,
    /// Offset just past `}}` (or end of text when unterminated).
    pub end: usize,
    /// Offsets of the expression body between the delimiters.
    pub body_start: usize,
    pub body_end: usize,
    pub unterminated: bool,
}

/// Locate `${{ ... }}` occurrences. The scanner respects single-quoted
/// strings, so `'}}'` inside a literal does not close the expression.
pub fn scan_expressions(text: &str) -> Vec<ExprMatch> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let Some(rel) = text[i..].find("${{") else {
            break;
        };
        let start = i + rel;
        let body_start = start + 3;
        let mut j = body_start;
        let mut in_string = false;
        let mut close = None;
        while j < bytes.len() {
            if in_string {
                if bytes[j] == b'\'' {
                    // `''` escapes a quote inside a string.
                    if bytes.get(j + 1) == Some(&b'\'') {
                        j += 2;
                        continue;
                    }
                    in_string = false;
                }
                j += 1;
                continue;
            }
            match bytes[j] {
                b'\'' => {
                    in_string = true;
                    j += 1;
                }
                b'}' if bytes.get(j + 1) == Some(&b'}') => {
                    close = Some(j);
                    break;
                }
                _ => j += 1,
            }
        }
        match close {
            Some(body_end) => {
                out.push(ExprMatch {
                    start,
                    end: body_end + 2,
                    body_start,
                    body_end,
                    unterminated: false,
                });
                i = body_end + 2;
            }
            None => {
                out.push(ExprMatch {
                    start,
                    end: bytes.len(),
                    body_start,
                    body_end: bytes.len(),
                    unterminated: true,
                });
                break;
            }
        }
    }
    out
}

/// Extract every expression occurrence from `text`, which must be the
/// verbatim source slice located at `base` for the produced spans to be
/// byte-accurate.
pub fn extract_expressions(text: &str, base: SourceSpan) -> Vec<TaintedExpr> {
    extract_with_policy(text, base, &TaintPolicy::default())
}

pub fn extract_with_policy(text: &str, base: SourceSpan, policy: &TaintPolicy) -> Vec<TaintedExpr> {
    scan_expressions(text)
        .into_iter()
        .map(|m| {
            let raw = text[m.start..m.end].to_string();
            let span = relocate(text, base, m.start, m.end);
            if m.unterminated {
                return TaintedExpr {
                    raw,
                    ast: None,
                    contexts: Vec::new(),
                    trust: Trust::Conditional,
                    span,
                    malformed: Some("unterminated `${{` delimiter".to_string()),
                };
            }
            let body = &text[m.body_start..m.body_end];
            match parse_expression(body) {
                Ok(ast) => {
                    let contexts = collect_contexts(&ast);
                    let mut expr = TaintedExpr {
                        raw,
                        ast: Some(ast),
                        contexts,
                        trust: Trust::Conditional,
                        span,
                        malformed: None,
                    };
                    expr.trust = policy.classify(&expr);
                    expr
                }
                Err(err) => TaintedExpr {
                    raw,
                    ast: None,
                    contexts: Vec::new(),
                    trust: Trust::Conditional,
                    span,
                    malformed: Some(err),
                },
            }
        })
        .collect()
}

/// Map a byte range inside `text` onto the source coordinates of `base`.
fn relocate(text: &str, base: SourceSpan, lo: usize, hi: usize) -> SourceSpan {
    let pos = |offset: usize| -> (usize, usize) {
        let before = &text[..offset];
        let newlines = before.bytes().filter(|b| *b == b'\n').count();
        if newlines == 0 {
            (base.start_line, base.start_col + before.chars().count())
        } else {
            let last_nl = before.rfind('\n').expect("newline counted");
            (
                base.start_line + newlines,
                before[last_nl + 1..].chars().count() + 1,
            )
        }
    };
    let (start_line, start_col) = pos(lo);
    let (end_line, end_col) = pos(hi);
    SourceSpan::new(
        base.start_byte + lo,
        base.start_byte + hi,
        start_line,
        end_line,
        start_col,
        end_col,
    )
}

pub fn collect_contexts(expr: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    walk_contexts(expr, &mut out);
    out
}

fn walk_contexts(expr: &Expr, out: &mut Vec<String>) {
    match expr {
        Expr::Context(path) => {
            out.push(path.dotted());
            for seg in &path.segments {
                if let PathSeg::Index(idx) = seg {
                    if !matches!(idx.as_ref(), Expr::Str(_) | Expr::Number(_)) {
                        walk_contexts(idx, out);
                    }
                }
            }
        }
        Expr::Index(base, idx) => {
            walk_contexts(base, out);
            walk_contexts(idx, out);
        }
        Expr::Not(inner) => walk_contexts(inner, out),
        Expr::Eq(a, b) | Expr::Ne(a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
            walk_contexts(a, out);
            walk_contexts(b, out);
        }
        Expr::Call { args, .. } => {
            for arg in args {
                walk_contexts(arg, out);
            }
        }
        Expr::Null | Expr::Bool(_) | Expr::Number(_) | Expr::Str(_) => {}
    }
}

// ---------------------------------------------------------------------------
// Taint policy
// ---------------------------------------------------------------------------

/// Context patterns deciding [`Trust`]. Patterns are dotted paths where `*`
/// matches one segment, and a trailing `*` matches one or more.
#[derive(Debug, Clone)]
pub struct TaintPolicy {
    pub untrusted: Vec<String>,
    pub trusted: Vec<String>,
}

/// Contexts an attacker can influence without write access: PR and issue
/// metadata, branch names from forks, and workflow inputs.
pub const DEFAULT_UNTRUSTED_CONTEXTS: &[&str] = &[
    "github.event.issue.title",
    "github.event.issue.body",
    "github.event.pull_request.title",
    "github.event.pull_request.body",
    "github.event.comment.body",
    "github.event.review.body",
    "github.event.review_comment.body",
    "github.event.commits.*.message",
    "github.event.head_commit.message",
    "github.event.head_commit.author.*",
    "github.head_ref",
    "github.event.pull_request.head.ref",
    "github.event.pull_request.head.label",
    "github.event.pull_request.head.repo.*",
    "github.event.workflow_run.head_branch",
    "github.event.workflow_run.head_commit.message",
    "github.event.workflow_run.head_repository.*",
    "inputs.*",
    "github.event.inputs.*",
    "github.event.discussion.title",
    "github.event.discussion.body",
];

/// Contexts fully controlled by the repository or the platform.
pub const DEFAULT_TRUSTED_CONTEXTS: &[&str] = &[
    "github.sha",
    "github.repository",
    "github.repository_owner",
    "github.repository_id",
    "github.repositoryurl",
    "github.event_name",
    "github.workflow",
    "github.workspace",
    "github.job",
    "github.run_id",
    "github.run_number",
    "github.run_attempt",
    "github.action",
    "github.action_path",
    "github.action_repository",
    "github.api_url",
    "github.server_url",
    "github.graphql_url",
    "github.token",
    "runner.*",
    "secrets.*",
];

impl Default for TaintPolicy {
    fn default() -> Self {
        Self {
            untrusted: DEFAULT_UNTRUSTED_CONTEXTS.iter().map(|s| s.to_string()).collect(),
            trusted: DEFAULT_TRUSTED_CONTEXTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TaintPolicy {
    pub fn with_extra_untrusted(extra: &[String]) -> Self {
        let mut policy = Self::default();
        policy.untrusted.extend(extra.iter().cloned());
        policy
    }

    /// Untrusted when any context matches the untrusted list; trusted when
    /// all contexts match the trusted list; conditional otherwise.
    pub fn classify(&self, expr: &TaintedExpr) -> Trust {
        self.classify_paths(&expr.contexts)
    }

    pub fn classify_paths(&self, contexts: &[String]) -> Trust {
        if contexts
            .iter()
            .any(|c| self.untrusted.iter().any(|p| pattern_matches(p, c)))
        {
            return Trust::Untrusted;
        }
        if contexts
            .iter()
            .all(|c| self.trusted.iter().any(|p| pattern_matches(p, c)))
        {
            return Trust::Trusted;
        }
        Trust::Conditional
    }

    pub fn is_untrusted_path(&self, path: &str) -> bool {
        self.untrusted.iter().any(|p| pattern_matches(p, path))
    }
}

/// Segment-wise match of a dotted pattern against a dotted path, both
/// case-insensitive. `*` matches exactly one segment except in trailing
/// position, where it matches one or more.
pub fn pattern_matches(pattern: &str, path: &str) -> bool {
    let pat: Vec<&str> = pattern.split('.').collect();
    let segs: Vec<String> = path.split('.').map(|s| s.to_ascii_lowercase()).collect();
    if pat.is_empty() || segs.is_empty() {
        return false;
    }
    let trailing_star = *pat.last().expect("non-empty") == "*";
    if trailing_star {
        if segs.len() < pat.len() {
            return false;
        }
    } else if segs.len() != pat.len() {
        return false;
    }
    for (i, p) in pat.iter().enumerate() {
        if *p == "*" {
            continue;
        }
        if !p.eq_ignore_ascii_case(&segs[i]) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Star,
    Bang,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Comma,
}

fn tokenize(input: &str) -> Result<Vec<Token>, String> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            b')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            b'[' => {
                tokens.push(Token::LBracket);
                i += 1;
            }
            b']' => {
                tokens.push(Token::RBracket);
                i += 1;
            }
            b'.' if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() => {
                // `.5` style numbers don't occur in workflows; treat as dot.
                tokens.push(Token::Dot);
                i += 1;
            }
            b'.' => {
                tokens.push(Token::Dot);
                i += 1;
            }
            b'*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            b',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push(Token::NotEq);
                    i += 2;
                } else {
                    tokens.push(Token::Bang);
                    i += 1;
                }
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push(Token::EqEq);
                    i += 2;
                } else {
                    return Err("single `=` is not a valid operator".to_string());
                }
            }
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    tokens.push(Token::AndAnd);
                    i += 2;
                } else {
                    return Err("single `&` is not a valid operator".to_string());
                }
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    tokens.push(Token::OrOr);
                    i += 2;
                } else {
                    return Err("single `|` is not a valid operator".to_string());
                }
            }
            b'\'' => {
                let mut value = String::new();
                let mut j = i + 1;
                loop {
                    match bytes.get(j) {
                        None => return Err("unterminated string literal".to_string()),
                        Some(b'\'') => {
                            if bytes.get(j + 1) == Some(&b'\'') {
                                value.push('\'');
                                j += 2;
                            } else {
                                j += 1;
                                break;
                            }
                        }
                        Some(_) => {
                            let ch_start = j;
                            let mut ch_end = j + 1;
                            while ch_end < bytes.len() && !input.is_char_boundary(ch_end) {
                                ch_end += 1;
                            }
                            value.push_str(&input[ch_start..ch_end]);
                            j = ch_end;
                        }
                    }
                }
                tokens.push(Token::Str(value));
                i = j;
            }
            b'-' | b'0'..=b'9' => {
                let start = i;
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    // A dot followed by a non-digit belongs to path syntax.
                    if bytes[i] == b'.' && !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                        break;
                    }
                    i += 1;
                }
                let text = &input[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| format!("invalid number literal `{text}`"))?;
                tokens.push(Token::Number(value));
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'-')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(input[start..i].to_string()));
            }
            other => return Err(format!("unexpected character `{}`", other as char)),
        }
    }
    Ok(tokens)
}

struct ExprParser {
    tokens: Vec<Token>,
    pos: usize,
}

/// Parse one expression body (the text between `${{` and `}}`).
pub fn parse_expression(body: &str) -> Result<Expr, String> {
    let tokens = tokenize(body)?;
    if tokens.is_empty() {
        return Err("empty expression".to_string());
    }
    let mut parser = ExprParser { tokens, pos: 0 };
    let expr = parser.parse_or()?;
    if parser.pos != parser.tokens.len() {
        return Err("trailing tokens after expression".to_string());
    }
    Ok(expr)
}

impl ExprParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, token: &Token, what: &str) -> Result<(), String> {
        match self.bump() {
            Some(t) if t == *token => Ok(()),
            _ => Err(format!("expected {what}")),
        }
    }

    fn parse_or(&mut self) -> Result<Expr, String> {
        let mut left = self.parse_and()?;
        while self.peek() == Some(&Token::OrOr) {
            self.bump();
            let right = self.parse_and()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Expr, String> {
        let mut left = self.parse_equality()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.bump();
            let right = self.parse_equality()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_equality(&mut self) -> Result<Expr, String> {
        let mut left = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Token::EqEq) => {
                    self.bump();
                    let right = self.parse_unary()?;
                    left = Expr::Eq(Box::new(left), Box::new(right));
                }
                Some(Token::NotEq) => {
                    self.bump();
                    let right = self.parse_unary()?;
                    left = Expr::Ne(Box::new(left), Box::new(right));
                }
                _ => break,
            }
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Expr, String> {
        if self.peek() == Some(&Token::Bang) {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(Expr::Not(Box::new(inner)));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, String> {
        let mut expr = self.parse_primary()?;
        loop {
            match self.peek() {
                Some(Token::Dot) => {
                    self.bump();
                    let segment = match self.bump() {
                        Some(Token::Ident(name)) => PathSeg::Name(name),
                        Some(Token::Star) => PathSeg::Star,
                        _ => return Err("expected property name after `.`".to_string()),
                    };
                    expr = push_segment(expr, segment);
                }
                Some(Token::LBracket) => {
                    self.bump();
                    let index = self.parse_or()?;
                    self.expect(&Token::RBracket, "`]`")?;
                    expr = match &expr {
                        Expr::Context(_) => push_segment(expr, PathSeg::Index(Box::new(index))),
                        _ => Expr::Index(Box::new(expr), Box::new(index)),
                    };
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn parse_primary(&mut self) -> Result<Expr, String> {
        match self.bump() {
            Some(Token::Number(n)) => Ok(Expr::Number(n)),
            Some(Token::Str(s)) => Ok(Expr::Str(s)),
            Some(Token::LParen) => {
                let inner = self.parse_or()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if self.peek() == Some(&Token::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek() != Some(&Token::RParen) {
                        loop {
                            args.push(self.parse_or()?);
                            match self.peek() {
                                Some(Token::Comma) => {
                                    self.bump();
                                }
                                _ => break,
                            }
                        }
                    }
                    self.expect(&Token::RParen, "`)`")?;
                    return Ok(Expr::Call { name, args });
                }
                match name.as_str() {
                    "true" => Ok(Expr::Bool(true)),
                    "false" => Ok(Expr::Bool(false)),
                    "null" => Ok(Expr::Null),
                    _ => Ok(Expr::Context(ContextPath {
                        segments: vec![PathSeg::Name(name)],
                    })),
                }
            }
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

fn push_segment(expr: Expr, segment: PathSeg) -> Expr {
    match expr {
        Expr::Context(mut path) => {
            path.segments.push(segment);
            Expr::Context(path)
        }
        other => {
            let index = match segment {
                PathSeg::Name(name) => Expr::Str(name),
                PathSeg::Star => Expr::Str("*".to_string()),
                PathSeg::Index(expr) => *expr,
            };
            Expr::Index(Box::new(other), Box::new(index))
        }
    }
}

/// Canonical printing; `parse(print(ast)) == ast`.
pub fn print_expression(expr: &Expr) -> String {
    print_prec(expr, 0)
}

fn print_prec(expr: &Expr, parent: u8) -> String {
    // Precedence levels: Or=1, And=2, Eq/Ne=3, unary/postfix/primary=4.
    let (text, prec) = match expr {
        Expr::Null => ("null".to_string(), 4),
        Expr::Bool(b) => (b.to_string(), 4),
        Expr::Number(n) => {
            if n.fract() == 0.0 && n.abs() < 1e15 {
                (format!("{}", *n as i64), 4)
            } else {
                (format!("{n}"), 4)
            }
        }
        Expr::Str(s) => (format!("'{}'", s.replace('\'', "''")), 4),
        Expr::Context(path) => {
            let mut out = String::new();
            for (i, seg) in path.segments.iter().enumerate() {
                match seg {
                    PathSeg::Name(name) => {
                        if i > 0 {
                            out.push('.');
                        }
                        out.push_str(name);
                    }
                    PathSeg::Star => out.push_str(".*"),
                    PathSeg::Index(expr) => {
                        out.push('[');
                        out.push_str(&print_prec(expr, 0));
                        out.push(']');
                    }
                }
            }
            (out, 4)
        }
        Expr::Index(base, idx) => (
            format!("{}[{}]", print_prec(base, 4), print_prec(idx, 0)),
            4,
        ),
        Expr::Not(inner) => (format!("!{}", print_prec(inner, 4)), 4),
        Expr::Eq(a, b) => (
            format!("{} == {}", print_prec(a, 4), print_prec(b, 4)),
            3,
        ),
        Expr::Ne(a, b) => (
            format!("{} != {}", print_prec(a, 4), print_prec(b, 4)),
            3,
        ),
        Expr::And(a, b) => (
            format!("{} && {}", print_prec(a, 2), print_prec(b, 3)),
            2,
        ),
        Expr::Or(a, b) => (
            format!("{} || {}", print_prec(a, 1), print_prec(b, 2)),
            1,
        ),
        Expr::Call { name, args } => {
            let rendered: Vec<String> = args.iter().map(|a| print_prec(a, 0)).collect();
            (format!("{}({})", name, rendered.join(", ")), 4)
        }
    };
    if prec < parent {
        format!("({text})")
    } else {
        text
    }
}

// ---------------------------------------------------------------------------
// Condition truthiness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Truthiness {
    AlwaysTrue,
    AlwaysFalse,
    DependsOnRuntime,
}

#[derive(Debug, Clone)]
pub struct TruthinessVerdict {
    pub value: Truthiness,
    pub reason: String,
}

impl TruthinessVerdict {
    fn new(value: Truthiness, reason: impl Into<String>) -> Self {
        Self {
            value,
            reason: reason.into(),
        }
    }
}

/// A statically known expression value, for constant folding.
#[derive(Debug, Clone, PartialEq)]
enum Const {
    Null,
    Bool(bool),
    Number(f64),
    Str(String),
}

impl Const {
    /// The runner's boolean cast: null and empty string are false, the
    /// number zero is false, everything else (including `'false'`) is true.
    fn truthy(&self) -> bool {
        match self {
            Const::Null => false,
            Const::Bool(b) => *b,
            Const::Number(n) => *n != 0.0,
            Const::Str(s) => !s.is_empty(),
        }
    }
}

fn fold_const(expr: &Expr) -> Option<Const> {
    match expr {
        Expr::Null => Some(Const::Null),
        Expr::Bool(b) => Some(Const::Bool(*b)),
        Expr::Number(n) => Some(Const::Number(*n)),
        Expr::Str(s) => Some(Const::Str(s.clone())),
        Expr::Not(inner) => Some(Const::Bool(!fold_const(inner)?.truthy())),
        Expr::Eq(a, b) => {
            let (a, b) = (fold_const(a)?, fold_const(b)?);
            Some(Const::Bool(const_eq(&a, &b)?))
        }
        Expr::Ne(a, b) => {
            let (a, b) = (fold_const(a)?, fold_const(b)?);
            Some(Const::Bool(!const_eq(&a, &b)?))
        }
        // `a && b` returns b when a is truthy, else a (same for ||).
        Expr::And(a, b) => {
            let a = fold_const(a)?;
            if a.truthy() {
                fold_const(b)
            } else {
                Some(a)
            }
        }
        Expr::Or(a, b) => {
            let a = fold_const(a)?;
            if a.truthy() {
                Some(a)
            } else {
                fold_const(b)
            }
        }
        Expr::Context(_) | Expr::Index(_, _) | Expr::Call { .. } => None,
    }
}

fn const_eq(a: &Const, b: &Const) -> Option<bool> {
    match (a, b) {
        (Const::Null, Const::Null) => Some(true),
        (Const::Bool(x), Const::Bool(y)) => Some(x == y),
        (Const::Number(x), Const::Number(y)) => Some(x == y),
        (Const::Str(x), Const::Str(y)) => Some(x == y),
        // Cross-type comparisons use coercion rules; leave them to runtime.
        _ => None,
    }
}

/// Statically evaluate a condition's truthiness.
pub fn evaluate_condition(cond: &RawCondition) -> TruthinessVerdict {
    evaluate_condition_text(&cond.text, cond.scalar_style)
}

pub fn evaluate_condition_text(text: &str, style: ConditionStyle) -> TruthinessVerdict {
    let matches = scan_expressions(text);

    if matches.is_empty() {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return TruthinessVerdict::new(Truthiness::AlwaysFalse, "empty condition");
        }
        if trimmed == "true" {
            return TruthinessVerdict::new(Truthiness::AlwaysTrue, "literal `true`");
        }
        if trimmed == "false" {
            return TruthinessVerdict::new(Truthiness::AlwaysFalse, "literal `false`");
        }
        return match parse_expression(trimmed) {
            Ok(ast) => verdict_for_ast(&ast),
            Err(err) => match style {
                ConditionStyle::Plain => TruthinessVerdict::new(
                    Truthiness::DependsOnRuntime,
                    format!("condition does not parse as an expression: {err}"),
                ),
                _ => TruthinessVerdict::new(
                    Truthiness::AlwaysTrue,
                    "non-empty constant string; non-empty strings are truthy",
                ),
            },
        };
    }

    if matches.iter().any(|m| m.unterminated) {
        return TruthinessVerdict::new(
            Truthiness::DependsOnRuntime,
            "unterminated expression delimiter",
        );
    }

    if matches.len() == 1 && matches[0].start == 0 && matches[0].end == text.len() {
        let body = &text[matches[0].body_start..matches[0].body_end];
        return match parse_expression(body) {
            Ok(ast) => verdict_for_ast(&ast),
            Err(err) => TruthinessVerdict::new(
                Truthiness::DependsOnRuntime,
                format!("unparseable expression: {err}"),
            ),
        };
    }

    // Characters exist around or between the expressions. After template
    // expansion they survive into the result, so the condition is a
    // non-empty string, and any non-empty string in `if:` evaluates to true.
    let mut outside = 0usize;
    let mut cursor = 0usize;
    for m in &matches {
        outside += text[cursor..m.start].len();
        cursor = m.end;
    }
    outside += text[cursor..].len();
    if outside > 0 {
        TruthinessVerdict::new(
            Truthiness::AlwaysTrue,
            "expression is embedded in a larger string; the expanded result is a \
             non-empty string, which is always truthy",
        )
    } else {
        TruthinessVerdict::new(
            Truthiness::DependsOnRuntime,
            "adjacent expressions with no surrounding text",
        )
    }
}

fn verdict_for_ast(ast: &Expr) -> TruthinessVerdict {
    match fold_const(ast) {
        Some(value) => {
            if value.truthy() {
                TruthinessVerdict::new(Truthiness::AlwaysTrue, "constant expression is truthy")
            } else {
                TruthinessVerdict::new(Truthiness::AlwaysFalse, "constant expression is falsy")
            }
        }
        None => TruthinessVerdict::new(
            Truthiness::DependsOnRuntime,
            "expression depends on runtime contexts",
        ),
    }
}

/// True when the condition is a forced-run guard: a lone `always()` call or
/// an `||` chain containing one at the top level.
pub fn is_forced_run_condition(cond: &RawCondition) -> bool {
    let text = cond.text.trim();
    let matches = scan_expressions(text);
    let body = if matches.len() == 1 && matches[0].start == 0 && matches[0].end == text.len() {
        &text[matches[0].body_start..matches[0].body_end]
    } else if matches.is_empty() {
        text
    } else {
        return false;
    };
    match parse_expression(body) {
        Ok(ast) => or_chain_contains_always(&ast),
        Err(_) => false,
    }
}

fn or_chain_contains_always(expr: &Expr) -> bool {
    match expr {
        Expr::Call { name, args } => name == "always" && args.is_empty(),
        Expr::Or(a, b) => or_chain_contains_always(a) || or_chain_contains_always(b),
        _ => false,
    }
}
