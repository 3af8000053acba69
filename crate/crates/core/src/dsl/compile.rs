use serde::Serialize;

use super::ast::{DslProgram, Statement};
use super::error::ParseError;
use super::parse;
use super::serialize::serialize;
use crate::catalog::Catalog;

/// Canonical compiled form of a program: one trigger and the ordered
/// action identifiers that follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub trigger: String,
    pub actions: Vec<String>,
    pub body: DslProgram,
}

impl Flow {
    /// Actions followed by the trigger, the operand scored by flow similarity.
    pub fn action_sequence(&self) -> Vec<&str> {
        self.actions
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.trigger.as_str()))
            .collect()
    }

    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            trigger: self.trigger.clone(),
            actions: self.actions.clone(),
            dsl: serialize(&self.body),
        }
    }
}

/// Serializable view of a [`Flow`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowSummary {
    pub trigger: String,
    pub actions: Vec<String>,
    pub dsl: String,
}

/// Resolves the trigger and the document-ordered action list.
///
/// The first statement must be a trigger call (a `commonTrigger` connector
/// or an operation the catalog marks as a trigger) and no later statement
/// may be one.
pub fn compile(program: &DslProgram, catalog: &Catalog) -> Result<Flow, ParseError> {
    let assignments = program.assignments();
    let first = match program.statements.first() {
        Some(Statement::Assign(first)) => first,
        _ => {
            return Err(ParseError::structural(
                0,
                "program does not start with a trigger call",
            ))
        }
    };
    if !catalog.is_trigger(&first.call.connector, &first.call.operation) {
        return Err(ParseError::structural(
            program.assignment_offset(0).unwrap_or(0),
            format!(
                "no trigger: first statement calls `{}`, which is not a trigger operation",
                first.call.dotted_name()
            ),
        ));
    }

    let mut actions = Vec::with_capacity(assignments.len().saturating_sub(1));
    for (index, assignment) in assignments.iter().enumerate().skip(1) {
        let call = &assignment.call;
        if catalog.is_trigger(&call.connector, &call.operation) {
            return Err(ParseError::structural(
                program.assignment_offset(index).unwrap_or(0),
                format!(
                    "second trigger `{}` in statement {}; a flow has exactly one trigger",
                    call.dotted_name(),
                    index + 1
                ),
            ));
        }
        actions.push(call.action_id());
    }

    Ok(Flow {
        trigger: first.call.action_id(),
        actions,
        body: program.clone(),
    })
}

/// Parse and compile in one step.
pub fn compile_source(source: &str, catalog: &Catalog) -> Result<Flow, ParseError> {
    compile(&parse(source)?, catalog)
}

/// Actions followed by the trigger appended at the end.
pub fn extract_action_sequence(flow: &Flow) -> Vec<String> {
    flow.action_sequence().into_iter().map(str::to_owned).collect()
}
