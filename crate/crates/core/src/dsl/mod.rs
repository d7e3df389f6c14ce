//! Textual model language.
//!
//! ```text
//! model coin_flip {
//!   exogenous u { domain {heads, tails} prior {1/2, 0.5} }
//!   variable a { domain {heads, tails} fn u }
//!   variable guess { domain {lo, hi} fn if a == heads then hi else lo }
//!   variable outcome {
//!     domain {lo, hi}
//!     fn table (a) { (heads) -> hi; default -> lo; }
//!   }
//!   protected a
//!   predictor guess
//!   target outcome
//! }
//! ```
//!
//! A bare identifier inside `fn` refers to a variable when one of that name
//! is declared anywhere in the document, and is a value literal otherwise.

mod lexer;
mod parser;
mod serialize;

use std::fmt;

use serde::Serialize;

use crate::scm::{CausalModel, Site};

pub use parser::{parse, parse_bytes};
pub use serialize::serialize;

pub const KEYWORDS: &[&str] = &[
    "model",
    "exogenous",
    "variable",
    "domain",
    "prior",
    "fn",
    "protected",
    "feature",
    "predictor",
    "target",
    "if",
    "then",
    "else",
    "table",
    "default",
];

/// ASCII letters, digits and underscore, starting with a letter, and not a keyword.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

/// Byte range `[start, end)` in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn merge(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    /// 1-based line and column (in characters) of `start`.
    pub fn line_col(self, text: &str) -> (usize, usize) {
        let start = floor_char_boundary(text, self.start);
        let before = &text[..start];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = text[line_start..start].chars().count() + 1;
        (line, column)
    }
}

fn floor_char_boundary(text: &str, mut i: usize) -> usize {
    i = i.min(text.len());
    while !text.is_char_boundary(i) {
        i -= 1;
    }
    i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl Diagnostic {
    pub(crate) fn error(text: &str, span: Span, message: impl Into<String>) -> Self {
        let span = Span::new(span.start.min(text.len()), span.end.min(text.len()));
        let (line, column) = span.line_col(text);
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            span,
            line,
            column,
            length: span.end - span.start,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level} at {}:{}: {}", self.line, self.column, self.message)
    }
}

/// A declaration whose source range is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Model,
    Variable(String),
    Prior(String),
    Function(String),
    Role(&'static str, String),
}

/// A parsed, validated model with the source it came from.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    pub source: String,
    pub model: CausalModel,
    pub spans: Vec<(Decl, Span)>,
}

impl ModelDocument {
    pub fn span_of(&self, decl: &Decl) -> Option<Span> {
        self.spans.iter().find(|(d, _)| d == decl).map(|(_, s)| *s)
    }
}

pub(crate) fn site_decl(site: Site<'_>) -> Decl {
    match site {
        Site::Variable(v) => Decl::Variable(v.to_owned()),
        Site::Prior(v) => Decl::Prior(v.to_owned()),
        Site::Function(v) => Decl::Function(v.to_owned()),
        Site::Role(role, v) => Decl::Role(role, v.to_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        assert!(is_identifier("skin_color"));
        assert!(is_identifier("x1"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier("_x"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("table"));
        assert!(!is_identifier("a-b"));
    }

    #[test]
    fn line_and_column() {
        let text = "ab\ncdé\nf";
        assert_eq!(Span::new(0, 1).line_col(text), (1, 1));
        assert_eq!(Span::new(4, 5).line_col(text), (2, 2));
        assert_eq!(Span::new(8, 9).line_col(text), (3, 1));
    }
}
