//! Recursive-descent parser.
//!
//! ```text
//! program     := statement+
//! statement   := assignment | conditional
//! assignment  := IDENT "=" ["await"] IDENT "." IDENT "(" object ")" ";"
//! conditional := "if" "(" reference ")" block ["else" block]
//! block       := "{" statement+ "}"
//! value       := object | array | STRING | NUMBER | "true" | "false" | "null" | reference
//! reference   := IDENT ("." IDENT)*
//! ```

use std::collections::HashMap;

use super::ast::{
    is_reserved, ActionCall, Assignment, Conditional, DslProgram, JsonNumber, ParamObject, ParamValue,
    Reference, Statement,
};
use super::error::{ParseError, ParseErrorKind};
use super::lexer::{tokenize, Token, TokenKind};

/// Nesting limit for blocks and JSON values, so hostile input cannot
/// exhaust the stack.
const MAX_DEPTH: usize = 64;

pub fn parse(source: &str) -> Result<DslProgram, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
        assignment_offsets: Vec::new(),
    };
    let statements = parser.parse_program()?;
    let program = DslProgram {
        statements,
        assignment_offsets: parser.assignment_offsets,
    };
    check_structure(&program)?;
    Ok(program)
}

fn check_structure(program: &DslProgram) -> Result<(), ParseError> {
    match program.statements.first() {
        None => return Err(ParseError::structural(0, "program has no statements")),
        Some(Statement::If(_)) => {
            return Err(ParseError::structural(
                0,
                "first statement must be the trigger call, found a conditional block",
            ))
        }
        Some(Statement::Assign(_)) => {}
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (index, assignment) in program.assignments().into_iter().enumerate() {
        if let Some(first) = seen.insert(assignment.target.as_str(), index) {
            let offset = program.assignment_offset(index).unwrap_or(0);
            return Err(ParseError::structural(
                offset,
                format!(
                    "duplicate assignment target `{}` (first assigned by statement {})",
                    assignment.target,
                    first + 1
                ),
            ));
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    assignment_offsets: Vec<usize>,
}

impl Parser {
    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek(&self, ahead: usize) -> &TokenKind {
        let idx = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        token
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Syntactic, self.current().offset, message)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error(format!(
            "expected {expected}, found {}",
            self.current().kind.describe()
        ))
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, ParseError> {
        if self.current().kind == kind {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&kind.describe()))
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.current().kind {
            TokenKind::Ident(name) if !is_reserved(name) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            TokenKind::Ident(name) => {
                Err(self.error(format!("reserved word `{name}` cannot be used as {what}")))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(&self.current().kind, TokenKind::Ident(name) if name == word)
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error(format!("nesting deeper than {MAX_DEPTH} levels")));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn parse_program(&mut self) -> Result<Vec<Statement>, ParseError> {
        let mut statements = Vec::new();
        while self.current().kind != TokenKind::Eof {
            statements.push(self.parse_statement()?);
        }
        Ok(statements)
    }

    fn parse_statement(&mut self) -> Result<Statement, ParseError> {
        if self.is_keyword("if") {
            return self.parse_conditional().map(Statement::If);
        }
        if self.is_keyword("else") {
            return Err(self.error("`else` without a preceding `if` block"));
        }
        self.parse_assignment().map(Statement::Assign)
    }

    fn parse_assignment(&mut self) -> Result<Assignment, ParseError> {
        let offset = self.current().offset;
        let target = self.expect_name("assignment target")?;
        self.expect(TokenKind::Eq)?;
        let awaited = self.is_keyword("await");
        if awaited {
            self.advance();
        }
        let connector = self.expect_name("connector name")?;
        self.expect(TokenKind::Dot)?;
        let operation = self.expect_name("operation name")?;
        self.expect(TokenKind::LParen)?;
        if self.current().kind != TokenKind::LBrace {
            return Err(self.unexpected("parameter object `{`"));
        }
        let params = self.parse_object()?;
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Semi)?;
        self.assignment_offsets.push(offset);
        Ok(Assignment {
            target,
            awaited,
            call: ActionCall {
                connector,
                operation,
                params,
            },
        })
    }

    fn parse_conditional(&mut self) -> Result<Conditional, ParseError> {
        self.enter()?;
        self.advance(); // `if`
        self.expect(TokenKind::LParen)?;
        let condition = self.parse_reference()?;
        self.expect(TokenKind::RParen)?;
        let then_branch = self.parse_block()?;
        let else_branch = if self.is_keyword("else") {
            self.advance();
            Some(self.parse_block()?)
        } else {
            None
        };
        self.leave();
        Ok(Conditional {
            condition,
            then_branch,
            else_branch,
        })
    }

    fn parse_block(&mut self) -> Result<Vec<Statement>, ParseError> {
        self.expect(TokenKind::LBrace)?;
        let mut statements = Vec::new();
        while self.current().kind != TokenKind::RBrace {
            if self.current().kind == TokenKind::Eof {
                return Err(self.unexpected("`}`"));
            }
            statements.push(self.parse_statement()?);
        }
        if statements.is_empty() {
            return Err(self.error("conditional block must contain at least one statement"));
        }
        self.advance();
        Ok(statements)
    }

    fn parse_reference(&mut self) -> Result<Reference, ParseError> {
        let mut segments = vec![self.expect_name("reference path")?];
        while self.current().kind == TokenKind::Dot {
            self.advance();
            match &self.current().kind {
                TokenKind::Ident(name) => {
                    segments.push(name.clone());
                    self.advance();
                }
                _ => return Err(self.unexpected("path segment after `.`")),
            }
        }
        Ok(Reference::new(segments).expect("segments validated while parsing"))
    }

    fn parse_object(&mut self) -> Result<ParamObject, ParseError> {
        self.enter()?;
        self.expect(TokenKind::LBrace)?;
        let mut object = ParamObject::new();
        if self.current().kind == TokenKind::RBrace {
            self.advance();
            self.leave();
            return Ok(object);
        }
        loop {
            let key_offset = self.current().offset;
            let key = match &self.current().kind {
                TokenKind::Str(key) => key.clone(),
                _ => return Err(self.unexpected("string key")),
            };
            self.advance();
            self.expect(TokenKind::Colon)?;
            let value = self.parse_value()?;
            if object.insert(key.clone(), value).is_err() {
                return Err(ParseError::new(
                    ParseErrorKind::Syntactic,
                    key_offset,
                    format!("duplicate key {key:?} in parameter object"),
                ));
            }
            match self.current().kind {
                TokenKind::Comma => {
                    self.advance();
                }
                TokenKind::RBrace => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected("`,` or `}`")),
            }
        }
        self.leave();
        Ok(object)
    }

    fn parse_array(&mut self) -> Result<Vec<ParamValue>, ParseError> {
        self.enter()?;
        self.expect(TokenKind::LBracket)?;
        let mut items = Vec::new();
        if self.current().kind == TokenKind::RBracket {
            self.advance();
            self.leave();
            return Ok(items);
        }
        loop {
            items.push(self.parse_value()?);
            match self.current().kind {
                TokenKind::Comma => {
                    self.advance();
                }
                TokenKind::RBracket => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected("`,` or `]`")),
            }
        }
        self.leave();
        Ok(items)
    }

    fn parse_value(&mut self) -> Result<ParamValue, ParseError> {
        match self.current().kind.clone() {
            TokenKind::LBrace => self.parse_object().map(ParamValue::Object),
            TokenKind::LBracket => self.parse_array().map(ParamValue::Array),
            TokenKind::Str(s) => {
                self.advance();
                Ok(ParamValue::String(s))
            }
            TokenKind::Number(n) => {
                let number = JsonNumber::parse(&n).ok_or_else(|| self.error("malformed number"))?;
                self.advance();
                Ok(ParamValue::Number(number))
            }
            TokenKind::Ident(word) => {
                let literal = match word.as_str() {
                    "true" => Some(ParamValue::Bool(true)),
                    "false" => Some(ParamValue::Bool(false)),
                    "null" => Some(ParamValue::Null),
                    _ => None,
                };
                match literal {
                    // `true.x` is not a literal, and a reserved head is rejected below
                    Some(value) if *self.peek(1) != TokenKind::Dot => {
                        self.advance();
                        Ok(value)
                    }
                    _ => self.parse_reference().map(ParamValue::Reference),
                }
            }
            _ => Err(self.unexpected("parameter value")),
        }
    }
}
