use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseErrorKind {
    /// Text outside the token alphabet.
    Lexical,
    /// Tokens that do not follow the grammar.
    Syntactic,
    /// Grammatical text that does not form a valid flow (no statements,
    /// misplaced or missing trigger, duplicate assignment target).
    Structural,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lexical => "lexical",
            ParseErrorKind::Syntactic => "syntactic",
            ParseErrorKind::Structural => "structural",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{kind} error at byte {offset}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> Self {
        Self {
            kind,
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn structural(offset: usize, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Structural, offset, message)
    }
}
