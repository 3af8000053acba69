//! Prompt assembly and metaprompt rendering.
//!
//! [`build_prompt`] lays out the enrichment signals for one generation call
//! in labeled sections. The `render_*` functions fill the data-generation
//! metaprompt templates shipped under `templates/`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::retrieval::ExampleRecord;

pub const DEFAULT_INSTRUCTION: &str = include_str!("../templates/instruction.txt");

const F2NL_TEMPLATE: &str = include_str!("../templates/f2nl.txt");
const STEPS_TEMPLATE: &str = include_str!("../templates/steps.txt");
const PARAPHRASE_TEMPLATE: &str = include_str!("../templates/paraphrase.txt");

/// Number of inference contexts in the flow-to-query template.
pub const F2NL_CONTEXTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("tenant tag must be non-empty")]
    EmptyTag,
    #[error("tenant tag {0:?} contains a bracket or newline")]
    InvalidTag(String),
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("{field} must be non-empty")]
    EmptyInput { field: &'static str },
    #[error("expected {expected} DSL texts, got {actual}")]
    WrongArity { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagPosition {
    #[default]
    Prefix,
    Suffix,
}

impl std::str::FromStr for TagPosition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefix" => Ok(TagPosition::Prefix),
            "suffix" => Ok(TagPosition::Suffix),
            other => Err(format!("unknown tag position {other:?}")),
        }
    }
}

/// Adds `[tag]` before or after the query. Re-applying a tag that is
/// already in place returns the input unchanged.
pub fn apply_tenant_tag(nl: &str, tag: &str, position: TagPosition) -> Result<String, PromptError> {
    if tag.is_empty() {
        return Err(PromptError::EmptyTag);
    }
    if tag.contains(['[', ']', '\n', '\r']) {
        return Err(PromptError::InvalidTag(tag.to_owned()));
    }
    let marker = format!("[{tag}]");
    Ok(match position {
        TagPosition::Prefix if nl.starts_with(&format!("{marker} ")) || nl == marker => nl.to_owned(),
        TagPosition::Suffix if nl.ends_with(&format!(" {marker}")) || nl == marker => nl.to_owned(),
        TagPosition::Prefix => format!("{marker} {nl}"),
        TagPosition::Suffix => format!("{nl} {marker}"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub instruction: String,
    pub nl_query: String,
    #[serde(default)]
    pub signatures: Option<Vec<String>>,
    #[serde(default)]
    pub steps: Option<String>,
    #[serde(default)]
    pub few_shots: Vec<ExampleRecord>,
    #[serde(default)]
    pub tenant_tag: Option<String>,
    #[serde(default)]
    pub tag_position: TagPosition,
}

impl PromptSpec {
    pub fn new(nl_query: impl Into<String>) -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.trim_end().to_owned(),
            nl_query: nl_query.into(),
            signatures: None,
            steps: None,
            few_shots: Vec::new(),
            tenant_tag: None,
            tag_position: TagPosition::Prefix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Instruction,
    FewShots,
    Signatures,
    Steps,
    Query,
}

impl SectionKind {
    fn heading(self) -> &'static str {
        match self {
            SectionKind::Instruction => "### Instruction",
            SectionKind::FewShots => "### Examples",
            SectionKind::Signatures => "### Functions",
            SectionKind::Steps => "### Steps",
            SectionKind::Query => "### Query",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptSection {
    pub kind: SectionKind,
    /// Byte range of the section, heading included.
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub sections: Vec<PromptSection>,
}

impl RenderedPrompt {
    pub fn section(&self, kind: SectionKind) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.kind == kind)
            .map(|s| &self.text[s.range.clone()])
    }

    pub fn kinds(&self) -> Vec<SectionKind> {
        self.sections.iter().map(|s| s.kind).collect()
    }
}

/// Assembles the generation prompt. Signals that are absent or empty
/// produce no section at all.
pub fn build_prompt(spec: &PromptSpec) -> Result<RenderedPrompt, PromptError> {
    if spec.nl_query.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    let query = match &spec.tenant_tag {
        Some(tag) => apply_tenant_tag(&spec.nl_query, tag, spec.tag_position)?,
        None => spec.nl_query.clone(),
    };

    let mut parts: Vec<(SectionKind, String)> = Vec::with_capacity(5);
    if !spec.instruction.trim().is_empty() {
        parts.push((SectionKind::Instruction, spec.instruction.trim_end().to_owned()));
    }
    if !spec.few_shots.is_empty() {
        let shots: Vec<String> = spec
            .few_shots
            .iter()
            .map(|shot| format!("Query: {}\nDSL:\n{}", shot.nl.trim_end(), shot.dsl.trim_end()))
            .collect();
        parts.push((SectionKind::FewShots, shots.join("\n\n")));
    }
    if let Some(signatures) = spec.signatures.as_ref().filter(|s| !s.is_empty()) {
        let list = serde_json::to_string(signatures).expect("string list serializes");
        parts.push((SectionKind::Signatures, list));
    }
    if let Some(steps) = spec.steps.as_ref().filter(|s| !s.trim().is_empty()) {
        parts.push((SectionKind::Steps, steps.trim_end().to_owned()));
    }
    parts.push((SectionKind::Query, query));

    let mut text = String::new();
    let mut sections = Vec::with_capacity(parts.len());
    for (kind, body) in parts {
        if !text.is_empty() {
            text.push_str("\n\n");
        }
        let start = text.len();
        text.push_str(kind.heading());
        text.push('\n');
        text.push_str(&body);
        sections.push(PromptSection {
            kind,
            range: start..text.len(),
        });
    }
    text.push('\n');
    Ok(RenderedPrompt { text, sections })
}

/// Single-pass `{{name}}` substitution, so inserted text is never rescanned.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let template = template.strip_suffix('\n').unwrap_or(template);
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").expect("template slot is closed");
        let name = &after[..close];
        let (_, value) = slots
            .iter()
            .find(|(slot, _)| *slot == name)
            .unwrap_or_else(|| panic!("template slot {name} has no value"));
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    out
}

/// Flow-to-query template with five inference contexts.
pub fn render_f2nl_metaprompt<S: AsRef<str>>(dsls: &[S]) -> Result<String, PromptError> {
    if dsls.len() != F2NL_CONTEXTS {
        return Err(PromptError::WrongArity {
            expected: F2NL_CONTEXTS,
            actual: dsls.len(),
        });
    }
    let texts: Vec<&str> = dsls.iter().map(|d| d.as_ref().trim()).collect();
    if texts.iter().any(|t| t.is_empty()) {
        return Err(PromptError::EmptyInput { field: "dsl" });
    }
    Ok(fill(
        F2NL_TEMPLATE,
        &[
            ("context_4", texts[0]),
            ("context_5", texts[1]),
            ("context_6", texts[2]),
            ("context_7", texts[3]),
            ("context_8", texts[4]),
        ],
    ))
}

/// Steps-summary template; signatures are listed one per line in dotted form.
pub fn render_steps_metaprompt<S: AsRef<str>>(
    nl: &str,
    dsl: &str,
    signatures: &[S],
) -> Result<String, PromptError> {
    if nl.trim().is_empty() {
        return Err(PromptError::EmptyInput { field: "task" });
    }
    if dsl.trim().is_empty() {
        return Err(PromptError::EmptyInput { field: "flow" });
    }
    if signatures.is_empty() {
        return Err(PromptError::EmptyInput { field: "signatures" });
    }
    let listed: Vec<String> = signatures
        .iter()
        .map(|s| serde_json::to_string(s.as_ref()).expect("string serializes"))
        .collect();
    Ok(fill(
        STEPS_TEMPLATE,
        &[
            ("task", nl.trim()),
            ("flow", dsl.trim()),
            ("signatures", &listed.join(",\n")),
        ],
    ))
}

pub fn render_paraphrase_metaprompt(nl: &str, steps: &str) -> Result<String, PromptError> {
    if nl.trim().is_empty() {
        return Err(PromptError::EmptyInput { field: "query" });
    }
    if steps.trim().is_empty() {
        return Err(PromptError::EmptyInput { field: "steps" });
    }
    Ok(fill(
        PARAPHRASE_TEMPLATE,
        &[("query", nl.trim()), ("explanation", steps.trim())],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, OperationSignature};
    use crate::dsl::{compile_source, parse};

    fn shot(nl: &str) -> ExampleRecord {
        ExampleRecord {
            nl: nl.into(),
            dsl: "t = await commonTrigger.Manual({});".into(),
            signatures: None,
            steps: None,
        }
    }

    #[test]
    fn instruction_and_query_only() {
        let prompt = build_prompt(&PromptSpec::new("Send me the weather")).unwrap();
        assert_eq!(prompt.kinds(), [SectionKind::Instruction, SectionKind::Query]);
        assert!(prompt.text.ends_with("### Query\nSend me the weather\n"));
        assert!(!prompt.text.contains("### Steps"));
    }

    #[test]
    fn five_sections_in_order() {
        let names = [
            "shared_office365.SendEmailV2",
            "shared_office365.MarkAsReadV3",
            "shared_outlook.OnNewEmailV2",
        ];
        let spec = PromptSpec {
            signatures: Some(names.iter().map(|s| s.to_string()).collect()),
            steps: Some("Read the mail, then reply.".into()),
            few_shots: vec![shot("a"), shot("b"), shot("c")],
            ..PromptSpec::new("Reply to new mail")
        };
        let prompt = build_prompt(&spec).unwrap();
        assert_eq!(
            prompt.kinds(),
            [
                SectionKind::Instruction,
                SectionKind::FewShots,
                SectionKind::Signatures,
                SectionKind::Steps,
                SectionKind::Query
            ]
        );
        let functions = prompt.section(SectionKind::Signatures).unwrap();
        for name in names {
            assert!(functions.contains(name), "{name}");
        }
        let starts: Vec<usize> = prompt.sections.iter().map(|s| s.range.start).collect();
        assert!(starts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_optional_signals_leave_no_markers() {
        let spec = PromptSpec {
            signatures: Some(vec![]),
            steps: Some("   ".into()),
            ..PromptSpec::new("q")
        };
        let prompt = build_prompt(&spec).unwrap();
        assert_eq!(prompt.kinds(), [SectionKind::Instruction, SectionKind::Query]);
    }

    #[test]
    fn tenant_tag_prefixes_query_line() {
        let spec = PromptSpec {
            tenant_tag: Some("sAPI".into()),
            ..PromptSpec::new("Save a completed agreement to Google Drive")
        };
        let prompt = build_prompt(&spec).unwrap();
        let query = prompt.section(SectionKind::Query).unwrap();
        assert_eq!(
            query.lines().nth(1).unwrap(),
            "[sAPI] Save a completed agreement to Google Drive"
        );
    }

    #[test]
    fn empty_query_rejected() {
        assert_eq!(build_prompt(&PromptSpec::new("  ")), Err(PromptError::EmptyQuery));
    }

    #[test]
    fn default_instruction_text() {
        assert!(DEFAULT_INSTRUCTION.contains("do not fill them with made up values"));
        assert!(DEFAULT_INSTRUCTION.starts_with("Apply your background knowledge of workflow automation"));
    }

    #[test]
    fn tag_prefix_and_suffix() {
        let nl = "Save a completed agreement to Google Drive";
        assert_eq!(
            apply_tenant_tag(nl, "sAPI", TagPosition::Prefix).unwrap(),
            "[sAPI] Save a completed agreement to Google Drive"
        );
        assert_eq!(
            apply_tenant_tag(nl, "sAPI", TagPosition::Suffix).unwrap(),
            "Save a completed agreement to Google Drive [sAPI]"
        );
    }

    #[test]
    fn tag_idempotent() {
        let once = apply_tenant_tag("q", "sAPI", TagPosition::Prefix).unwrap();
        assert_eq!(
            apply_tenant_tag(&once, "sAPI", TagPosition::Prefix).unwrap(),
            once
        );
        let both = apply_tenant_tag(&once, "sAPI", TagPosition::Suffix).unwrap();
        assert_eq!(both, "[sAPI] q [sAPI]");
        assert_eq!(
            apply_tenant_tag(&both, "sAPI", TagPosition::Prefix).unwrap(),
            both
        );
        assert_eq!(
            apply_tenant_tag(&both, "sAPI", TagPosition::Suffix).unwrap(),
            both
        );
    }

    #[test]
    fn tag_validation() {
        assert_eq!(
            apply_tenant_tag("q", "", TagPosition::Prefix),
            Err(PromptError::EmptyTag)
        );
        for bad in ["a]b", "[x", "two\nlines"] {
            assert!(matches!(
                apply_tenant_tag("q", bad, TagPosition::Prefix),
                Err(PromptError::InvalidTag(_))
            ));
        }
    }

    #[test]
    fn f2nl_arity_and_slots() {
        let dsls = ["d4", "d5", "d6", "d7", "d8"];
        let text = render_f2nl_metaprompt(&dsls).unwrap();
        assert!(text.ends_with("completion 8c:"));
        assert!(text.contains("context 8: d8\n"));
        assert!(text.contains(
            "completion 1a: Update a record in a Dataverse table when a new item is added to a sharepoint list\n"
        ));
        assert_eq!(text.matches("\ncompletion ").count(), 24);
        assert_eq!(
            render_f2nl_metaprompt(&dsls[..4]),
            Err(PromptError::WrongArity {
                expected: 5,
                actual: 4
            })
        );
    }

    #[test]
    fn inserted_text_is_not_rescanned() {
        let dsls = ["{{context_5}}", "x", "x", "x", "x"];
        let text = render_f2nl_metaprompt(&dsls).unwrap();
        assert!(text.contains("context 4: {{context_5}}\n"));
    }

    #[test]
    fn worked_examples_are_valid_flows() {
        for template in [F2NL_TEMPLATE, STEPS_TEMPLATE] {
            for line in template.lines() {
                let dsl = line.strip_prefix("\"flow\": ").or_else(|| {
                    line.split_once(": ")
                        .filter(|(h, _)| h.starts_with("context "))
                        .map(|(_, d)| d)
                });
                let Some(first) = dsl.filter(|d| d.starts_with("triggerOutputs")) else {
                    continue;
                };
                // each worked flow spans its first line and the following action lines
                let mut text = first.to_owned();
                let mut rest = template[template.find(line).unwrap() + line.len()..]
                    .lines()
                    .skip(1);
                while let Some(next) = rest.next().filter(|l| l.starts_with("outputs_")) {
                    text.push('\n');
                    text.push_str(next);
                }
                let program = parse(&text).unwrap();
                let first = program.assignments()[0].call.clone();
                let catalog = Catalog::from_signatures(
                    vec![OperationSignature::trigger(first.connector, first.operation)],
                    "test",
                )
                .unwrap();
                compile_source(&text, &catalog).unwrap();
            }
        }
    }

    #[test]
    fn steps_template_shape() {
        let text = render_steps_metaprompt(
            "Get agreement approval on a new file in OneDrive for Business.",
            "t = await shared_onedriveforbusiness.OnNewFile({});",
            &[
                "shared_onedriveforbusiness.OnNewFile",
                "shared_flowpush.SendNotification",
            ],
        )
        .unwrap();
        assert!(text.ends_with("steps:"));
        assert!(text.contains("keep it simple and very short"));
        assert!(text.contains(
            "\"shared_onedriveforbusiness.OnNewFile\",\n\"shared_flowpush.SendNotification\"\n\nsteps:"
        ));
        assert!(render_steps_metaprompt("", "x", &["a"]).is_err());
    }

    #[test]
    fn paraphrase_template() {
        let nl = "Get notified when a participant views the agreement email";
        let text = render_paraphrase_metaprompt(nl, "The user wants a notification.").unwrap();
        assert!(text.starts_with(
            "You are an AI assistant that helps to paraphrase natural language user queries for a workflow automation."
        ));
        assert!(text.contains(&format!("Query: {nl}\n")));
        assert!(text.ends_with("Explanation: The user wants a notification."));
        assert_eq!(
            render_paraphrase_metaprompt(nl, ""),
            Err(PromptError::EmptyInput { field: "steps" })
        );
    }
}
