//! SQL subset front end: directive splitting, tokenizing, parsing and
//! execution against a [`Database`](crate::table::Database).

mod exec;
mod lexer;
mod parser;

pub use exec::{execute, run, ResultSet};
pub use lexer::{split_statements, tokenize, Keyword, Token, TokenKind};
pub use parser::{parse, Statement};

use crate::error::Result;

/// Tokenizes and parses one directive.
pub fn parse_statement(text: &str) -> Result<Statement> {
    parse(&tokenize(text)?)
}

/// Splits `input` into directives and parses all of them.
pub fn parse_script(input: &str) -> Result<Vec<Statement>> {
    split_statements(input)?
        .into_iter()
        .map(parse_statement)
        .collect()
}
