use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Create,
    Table,
    Drop,
    Insert,
    Into,
    Values,
    Select,
    From,
    Delete,
    Where,
    Get,
    Int,
    Str,
}

impl Keyword {
    const ALL: [(Keyword, &'static str); 13] = [
        (Keyword::Create, "CREATE"),
        (Keyword::Table, "TABLE"),
        (Keyword::Drop, "DROP"),
        (Keyword::Insert, "INSERT"),
        (Keyword::Into, "INTO"),
        (Keyword::Values, "VALUES"),
        (Keyword::Select, "SELECT"),
        (Keyword::From, "FROM"),
        (Keyword::Delete, "DELETE"),
        (Keyword::Where, "WHERE"),
        (Keyword::Get, "GET"),
        (Keyword::Int, "INT"),
        (Keyword::Str, "STR"),
    ];

    pub fn lookup(word: &str) -> Option<Keyword> {
        Self::ALL
            .iter()
            .find(|(_, text)| text.eq_ignore_ascii_case(word))
            .map(|(k, _)| *k)
    }

    pub fn as_str(self) -> &'static str {
        Self::ALL.iter().find(|(k, _)| *k == self).unwrap().1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    IntLiteral,
    StringLiteral,
    Symbol(char),
}

/// A token borrowing its exact source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of `text` in the tokenized input.
    pub position: usize,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.position + self.text.len()
    }

    /// Unescaped contents of a string literal.
    pub fn string_value(&self) -> String {
        debug_assert_eq!(self.kind, TokenKind::StringLiteral);
        self.text[1..self.text.len() - 1].replace("''", "'")
    }
}

const SYMBOLS: &[u8] = b"(),=*";

fn lex_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Lex {
        offset,
        message: message.into(),
    }
}

/// Finds the end of the string literal opening at `start` (exclusive end
/// offset, past the closing quote).
fn string_end(bytes: &[u8], start: usize) -> Result<usize> {
    let mut i = start + 1;
    loop {
        match bytes.get(i) {
            None => return Err(lex_error(start, "unterminated string literal")),
            Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => i += 2,
            Some(b'\'') => return Ok(i + 1),
            Some(_) => i += 1,
        }
    }
}

/// Splits input into directives on `;` outside string literals. Segments are
/// trimmed and empty ones dropped.
pub fn split_statements(input: &str) -> Result<Vec<&str>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' => i = string_end(bytes, i)?,
            b';' => {
                push_trimmed(&mut out, &input[start..i]);
                i += 1;
                start = i;
            }
            _ => i += 1,
        }
    }
    push_trimmed(&mut out, &input[start..]);
    Ok(out)
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, segment: &'a str) {
    let s = segment.trim();
    if !s.is_empty() {
        out.push(s);
    }
}

pub fn tokenize(input: &str) -> Result<Vec<Token<'_>>> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let kind = match b {
            _ if b.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            b'\'' => {
                i = string_end(bytes, i)?;
                TokenKind::StringLiteral
            }
            b'-' | b'0'..=b'9' => {
                if b == b'-' {
                    i += 1;
                    if !bytes.get(i).is_some_and(u8::is_ascii_digit) {
                        return Err(lex_error(start, "`-` must be followed by digits"));
                    }
                }
                while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                    i += 1;
                }
                TokenKind::IntLiteral
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                while bytes
                    .get(i)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    i += 1;
                }
                match Keyword::lookup(&input[start..i]) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Identifier,
                }
            }
            _ if SYMBOLS.contains(&b) => {
                i += 1;
                TokenKind::Symbol(b as char)
            }
            _ => {
                let c = input[start..].chars().next().unwrap();
                return Err(lex_error(start, format!("illegal character {c:?}")));
            }
        };
        tokens.push(Token {
            kind,
            text: &input[start..i],
            position: start,
        });
    }
    Ok(tokens)
}
