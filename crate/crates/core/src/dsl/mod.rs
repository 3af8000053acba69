//! The workflow DSL: lexer, parser, canonical serializer and compiler.
//!
//! A program is a sequence of assignments whose right-hand side calls one
//! connector operation with a JSON parameter object. The first assignment is
//! the trigger; everything after it is an action.
//!
//! ```
//! use flowdsl::catalog::Catalog;
//! use flowdsl::dsl::{compile, parse};
//!
//! let program = parse(r#"t = await commonTrigger.Recurrence({ "interval": 1 });
//! mail = shared_office365.SendEmailV2({ "To": "me@example.com" });"#).unwrap();
//! let flow = compile(&program, &Catalog::empty()).unwrap();
//! assert_eq!(flow.trigger, "commonTrigger_Recurrence");
//! assert_eq!(flow.actions, ["shared_office365_SendEmailV2"]);
//! ```

mod ast;
mod compile;
mod error;
mod lexer;
mod parser;
mod serialize;

pub use ast::{
    is_identifier, is_reserved, ActionCall, Assignment, Conditional, DslProgram, JsonNumber, ParamObject,
    ParamValue, Reference, Statement, RESERVED_WORDS,
};
pub use compile::{compile, compile_source, extract_action_sequence, Flow, FlowSummary};
pub use error::{ParseError, ParseErrorKind};
pub use parser::parse;
pub use serialize::{serialize, value_to_string};
