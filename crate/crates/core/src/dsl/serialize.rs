//! Canonical text form: one statement per line, conditional bodies indented
//! by two spaces, JSON written with `": "` and `", "` separators and keys in
//! insertion order.

use std::fmt::Write as _;

use super::ast::{Assignment, Conditional, DslProgram, ParamObject, ParamValue, Statement};

pub fn serialize(program: &DslProgram) -> String {
    let mut out = String::new();
    write_statements(&mut out, &program.statements, 0);
    out
}

fn write_statements(out: &mut String, statements: &[Statement], depth: usize) {
    for (i, statement) in statements.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match statement {
            Statement::Assign(assignment) => write_assignment(out, assignment, depth),
            Statement::If(block) => write_conditional(out, block, depth),
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_assignment(out: &mut String, assignment: &Assignment, depth: usize) {
    indent(out, depth);
    let call = &assignment.call;
    let _ = write!(
        out,
        "{} = {}{}.{}(",
        assignment.target,
        if assignment.awaited { "await " } else { "" },
        call.connector,
        call.operation
    );
    write_object(out, &call.params);
    out.push_str(");");
}

fn write_conditional(out: &mut String, block: &Conditional, depth: usize) {
    indent(out, depth);
    let _ = writeln!(out, "if ({}) {{", block.condition);
    write_statements(out, &block.then_branch, depth + 1);
    out.push('\n');
    indent(out, depth);
    out.push('}');
    if let Some(else_branch) = &block.else_branch {
        out.push_str(" else {\n");
        write_statements(out, else_branch, depth + 1);
        out.push('\n');
        indent(out, depth);
        out.push('}');
    }
}

fn write_object(out: &mut String, object: &ParamObject) {
    if object.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{ ");
    for (i, (key, value)) in object.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_string(out, key);
        out.push_str(": ");
        write_value(out, value);
    }
    out.push_str(" }");
}

/// Canonical rendering of a single parameter value.
pub fn value_to_string(value: &ParamValue) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

fn write_value(out: &mut String, value: &ParamValue) {
    match value {
        ParamValue::Null => out.push_str("null"),
        ParamValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ParamValue::Number(n) => out.push_str(n.as_str()),
        ParamValue::String(s) => write_string(out, s),
        ParamValue::Reference(r) => {
            let _ = write!(out, "{r}");
        }
        ParamValue::Object(o) => write_object(out, o),
        ParamValue::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item);
            }
            out.push(']');
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}
