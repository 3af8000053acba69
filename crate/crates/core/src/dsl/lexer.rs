use super::ast::number_lexeme_len;
use super::error::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    Ident(String),
    Str(String),
    Number(String),
    Eq,
    Dot,
    Comma,
    Colon,
    Semi,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eof,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let single = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'=' => Some(TokenKind::Eq),
            b'.' => Some(TokenKind::Dot),
            b',' => Some(TokenKind::Comma),
            b':' => Some(TokenKind::Colon),
            b';' => Some(TokenKind::Semi),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b'{' => Some(TokenKind::LBrace),
            b'}' => Some(TokenKind::RBrace),
            b'[' => Some(TokenKind::LBracket),
            b']' => Some(TokenKind::RBracket),
            _ => None,
        };
        if let Some(kind) = single {
            tokens.push(Token { kind, offset: start });
            i += 1;
            continue;
        }

        if b.is_ascii_alphabetic() || b == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(source[start..i].to_owned()),
                offset: start,
            });
        } else if b == b'-' || b.is_ascii_digit() {
            let len =
                number_lexeme_len(&bytes[i..]).ok_or_else(|| lexical(start, "malformed number literal"))?;
            i += len;
            // `1abc` or `1.5.3` would otherwise split into two valid tokens
            if i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                return Err(lexical(i, "unexpected character after number literal"));
            }
            tokens.push(Token {
                kind: TokenKind::Number(source[start..i].to_owned()),
                offset: start,
            });
        } else if b == b'"' {
            let (value, end) = lex_string(source, start)?;
            i = end;
            tokens.push(Token {
                kind: TokenKind::Str(value),
                offset: start,
            });
        } else {
            let ch = source[start..].chars().next().unwrap_or('\u{FFFD}');
            return Err(lexical(start, format!("unexpected character {ch:?}")));
        }
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: bytes.len(),
    });
    Ok(tokens)
}

fn lexical(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::new(ParseErrorKind::Lexical, offset, message)
}

/// Decodes the JSON string starting at `start` (which holds the opening
/// quote). Returns the value and the offset just past the closing quote.
fn lex_string(source: &str, start: usize) -> Result<(String, usize), ParseError> {
    let mut out = String::new();
    let mut chars = source[start + 1..]
        .char_indices()
        .map(|(i, c)| (i + start + 1, c));

    while let Some((pos, c)) = chars.next() {
        match c {
            '"' => return Ok((out, pos + 1)),
            '\\' => {
                let (esc_pos, esc) = chars
                    .next()
                    .ok_or_else(|| lexical(pos, "unterminated escape sequence"))?;
                match esc {
                    '"' => out.push('"'),
                    '\\' => out.push('\\'),
                    '/' => out.push('/'),
                    'b' => out.push('\u{8}'),
                    'f' => out.push('\u{c}'),
                    'n' => out.push('\n'),
                    'r' => out.push('\r'),
                    't' => out.push('\t'),
                    'u' => {
                        let high = read_hex4(&mut chars, esc_pos)?;
                        let code = if (0xD800..0xDC00).contains(&high) {
                            match (chars.next(), chars.next()) {
                                (Some((_, '\\')), Some((_, 'u'))) => {}
                                _ => return Err(lexical(pos, "unpaired surrogate in \\u escape")),
                            }
                            let low = read_hex4(&mut chars, esc_pos)?;
                            if !(0xDC00..0xE000).contains(&low) {
                                return Err(lexical(pos, "invalid low surrogate in \\u escape"));
                            }
                            0x10000 + ((high - 0xD800) << 10) + (low - 0xDC00)
                        } else {
                            high
                        };
                        let ch = char::from_u32(code).ok_or_else(|| lexical(pos, "invalid \\u escape"))?;
                        out.push(ch);
                    }
                    other => return Err(lexical(esc_pos, format!("invalid escape `\\{other}`"))),
                }
            }
            c if (c as u32) < 0x20 => {
                return Err(lexical(pos, "control character in string literal"));
            }
            c => out.push(c),
        }
    }
    Err(lexical(start, "unterminated string literal"))
}

fn read_hex4(chars: &mut impl Iterator<Item = (usize, char)>, at: usize) -> Result<u32, ParseError> {
    let mut value = 0u32;
    for _ in 0..4 {
        let (_, c) = chars.next().ok_or_else(|| lexical(at, "truncated \\u escape"))?;
        let digit = c
            .to_digit(16)
            .ok_or_else(|| lexical(at, "non-hex digit in \\u escape"))?;
        value = value * 16 + digit;
    }
    Ok(value)
}
