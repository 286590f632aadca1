//! Byte- and line-level source locations.
//!
//! Every node in the workflow model carries a [`SourceSpan`] pointing back
//! into the original file bytes, so findings can report exact lines and
//! autofixes can splice bytes without re-serializing YAML.

use serde::{Deserialize, Serialize};

/// A half-open byte range `[start_byte, end_byte)` in a source file, with
/// 1-based line and column information for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_byte: usize,
    pub end_byte: usize,
    /// 1-based line of the first byte.
    pub start_line: usize,
    /// 1-based line of the last byte (equal to `start_line` for single-line spans).
    pub end_line: usize,
    /// 1-based column (in characters) of the first byte on its line.
    pub start_col: usize,
    /// 1-based column just past the last character.
    pub end_col: usize,
}

impl SourceSpan {
    pub fn new(
        start_byte: usize,
        end_byte: usize,
        start_line: usize,
        end_line: usize,
        start_col: usize,
        end_col: usize,
    ) -> Self {
        debug_assert!(start_byte <= end_byte);
        debug_assert!(start_line <= end_line);
        Self {
            start_byte,
            end_byte,
            start_line,
            end_line,
            start_col,
            end_col,
        }
    }

    /// An empty span at byte 0, line 1. Used for whole-document diagnostics
    /// when no better anchor exists.
    pub fn zero() -> Self {
        Self::new(0, 0, 1, 1, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.end_byte - self.start_byte
    }

    pub fn is_empty(&self) -> bool {
        self.start_byte == self.end_byte
    }

    /// The source slice this span covers.
    pub fn slice<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start_byte.min(source.len())..self.end_byte.min(source.len())]
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start_byte <= other.start_byte && other.end_byte <= self.end_byte
    }

    pub fn overlaps(&self, other: &SourceSpan) -> bool {
        self.start_byte < other.end_byte && other.start_byte < self.end_byte
    }

    /// Join two spans into the smallest span covering both.
    pub fn cover(&self, other: &SourceSpan) -> SourceSpan {
        let (start_byte, start_line, start_col) = if self.start_byte <= other.start_byte {
            (self.start_byte, self.start_line, self.start_col)
        } else {
            (other.start_byte, other.start_line, other.start_col)
        };
        let (end_byte, end_line, end_col) = if self.end_byte >= other.end_byte {
            (self.end_byte, self.end_line, self.end_col)
        } else {
            (other.end_byte, other.end_line, other.end_col)
        };
        SourceSpan::new(start_byte, end_byte, start_line, end_line, start_col, end_col)
    }
}

/// Line-oriented index over a source string.
///
/// Maps byte offsets to 1-based (line, column) pairs and back. Built once per
/// file and shared by the parser and the expression extractor.
#[derive(Debug, Clone)]
pub struct LineIndex {
    /// Byte offset of the start of each line (line_starts[0] == 0).
    line_starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(source: &str) -> Self {
        let mut line_starts = vec![0usize];
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        Self {
            line_starts,
            len: source.len(),
        }
    }

    /// 1-based line number containing the given byte offset.
    pub fn line_of(&self, byte: usize) -> usize {
        match self.line_starts.binary_search(&byte) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Byte offset of the start of a 1-based line.
    pub fn line_start(&self, line: usize) -> usize {
        self.line_starts
            .get(line.saturating_sub(1))
            .copied()
            .unwrap_or(self.len)
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    /// Build a span from a byte range, computing line/column info.
    pub fn span(&self, source: &str, start_byte: usize, end_byte: usize) -> SourceSpan {
        let start_line = self.line_of(start_byte);
        // End position is exclusive; an empty span sits entirely on its line.
        let end_line = if end_byte > start_byte {
            self.line_of(end_byte.saturating_sub(1))
        } else {
            start_line
        };
        let start_col = col_of(source, self.line_start(start_line), start_byte);
        let end_col = col_of(source, self.line_start(end_line), end_byte);
        SourceSpan::new(start_byte, end_byte, start_line, end_line, start_col, end_col)
    }
}

fn col_of(source: &str, line_start: usize, byte: usize) -> usize {
    let upto = byte.clamp(line_start, source.len());
    source[line_start..upto].chars().count() + 1
}
