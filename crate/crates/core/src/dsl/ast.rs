//! Syntax tree for flow programs.

use std::fmt;

/// Words that cannot be used as assignment targets, connector or operation
/// names, or as the head of a reference path.
pub const RESERVED_WORDS: [&str; 6] = ["if", "else", "await", "true", "false", "null"];

pub fn is_reserved(word: &str) -> bool {
    RESERVED_WORDS.contains(&word)
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A parsed flow program.
///
/// Equality is structural: the byte offsets recorded while parsing are
/// diagnostics only and take no part in comparisons.
#[derive(Debug, Clone, Default)]
pub struct DslProgram {
    pub statements: Vec<Statement>,
    /// Source offset of every assignment, in document order. Empty for
    /// programs built in memory.
    pub(crate) assignment_offsets: Vec<usize>,
}

impl PartialEq for DslProgram {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Eq for DslProgram {}

impl DslProgram {
    pub fn new(statements: Vec<Statement>) -> Self {
        Self {
            statements,
            assignment_offsets: Vec::new(),
        }
    }

    /// All assignments, conditional branches flattened in document order
    /// (then-branch before else-branch).
    pub fn assignments(&self) -> Vec<&Assignment> {
        let mut out = Vec::new();
        collect_assignments(&self.statements, &mut out);
        out
    }

    /// Source offset of the `index`-th assignment in document order, if known.
    pub fn assignment_offset(&self, index: usize) -> Option<usize> {
        self.assignment_offsets.get(index).copied()
    }
}

fn collect_assignments<'a>(statements: &'a [Statement], out: &mut Vec<&'a Assignment>) {
    for statement in statements {
        match statement {
            Statement::Assign(assignment) => out.push(assignment),
            Statement::If(block) => {
                collect_assignments(&block.then_branch, out);
                if let Some(else_branch) = &block.else_branch {
                    collect_assignments(else_branch, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Assign(Assignment),
    If(Conditional),
}

/// `target = [await] connector.operation({...});`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub target: String,
    pub awaited: bool,
    pub call: ActionCall,
}

/// `if (reference) { ... } else { ... }`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conditional {
    pub condition: Reference,
    pub then_branch: Vec<Statement>,
    pub else_branch: Option<Vec<Statement>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCall {
    pub connector: String,
    pub operation: String,
    pub params: ParamObject,
}

impl ActionCall {
    pub fn new(connector: impl Into<String>, operation: impl Into<String>) -> Self {
        Self {
            connector: connector.into(),
            operation: operation.into(),
            params: ParamObject::default(),
        }
    }

    pub fn with_params(mut self, params: ParamObject) -> Self {
        self.params = params;
        self
    }

    /// `connector_operation`, the form used for matching and scoring.
    pub fn action_id(&self) -> String {
        format!("{}_{}", self.connector, self.operation)
    }

    /// `connector.operation`, the form used in signature lists.
    pub fn dotted_name(&self) -> String {
        format!("{}.{}", self.connector, self.operation)
    }

    /// Human-facing label with the `shared_` namespace dropped. Never use for matching.
    pub fn display_name(&self) -> String {
        let connector = self.connector.strip_prefix("shared_").unwrap_or(&self.connector);
        format!("{connector}.{}", self.operation)
    }
}

/// Insertion-ordered JSON object with unique keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamObject {
    entries: Vec<(String, ParamValue)>,
}

impl ParamObject {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry. Returns the value back if the key is already present.
    pub fn insert(&mut self, key: impl Into<String>, value: ParamValue) -> Result<(), ParamValue> {
        let key = key.into();
        if self.get(&key).is_some() {
            return Err(value);
        }
        self.entries.push((key, value));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamValue {
    Null,
    Bool(bool),
    Number(JsonNumber),
    String(String),
    Array(Vec<ParamValue>),
    Object(ParamObject),
    Reference(Reference),
}

/// A JSON number kept as its source lexeme so re-serialization is byte-stable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JsonNumber(String);

impl JsonNumber {
    /// Accepts exactly the JSON number grammar.
    pub fn parse(text: &str) -> Option<Self> {
        (number_lexeme_len(text.as_bytes()) == Some(text.len())).then(|| Self(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0.parse().unwrap_or(f64::NAN)
    }
}

impl From<i64> for JsonNumber {
    fn from(value: i64) -> Self {
        Self(value.to_string())
    }
}

impl fmt::Display for JsonNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Length of the JSON number at the start of `bytes`, if one is there.
pub(crate) fn number_lexeme_len(bytes: &[u8]) -> Option<usize> {
    let mut i = 0;
    if bytes.first() == Some(&b'-') {
        i += 1;
    }
    match bytes.get(i) {
        Some(b'0') => i += 1,
        Some(b'1'..=b'9') => {
            while matches!(bytes.get(i), Some(b'0'..=b'9')) {
                i += 1;
            }
        }
        _ => return None,
    }
    if bytes.get(i) == Some(&b'.') {
        i += 1;
        let start = i;
        while matches!(bytes.get(i), Some(b'0'..=b'9')) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(bytes.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let start = i;
        while matches!(bytes.get(i), Some(b'0'..=b'9')) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    Some(i)
}

/// Dotted path to an earlier step's output, e.g. `triggerOutputs.body.value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Reference(Vec<String>);

impl Reference {
    /// Every segment must be an identifier and the head must not be reserved.
    pub fn new<I, S>(segments: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        let head = segments.first()?;
        if is_reserved(head) || !segments.iter().all(|s| is_identifier(s)) {
            return None;
        }
        Some(Self(segments))
    }

    pub fn parse(path: &str) -> Option<Self> {
        Self::new(path.split('.'))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn root(&self) -> &str {
        &self.0[0]
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}
