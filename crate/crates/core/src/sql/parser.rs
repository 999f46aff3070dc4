//! Recursive-descent parser for the statement grammar:
//!
//! ```text
//! stmt   := create | drop | insert | select | delete | get
//! create := CREATE TABLE ident ( coldef (, coldef)* )
//! coldef := ident ( INT | STR ( int ) )
//! drop   := DROP TABLE ident
//! insert := INSERT INTO ident VALUES ( literal (, literal)* )
//! select := SELECT * FROM ident [where]
//! delete := DELETE FROM ident [where]
//! get    := GET ident int
//! where  := WHERE ident = literal
//! literal := int | string
//! ```

use std::fmt;

use super::lexer::{Keyword, Token, TokenKind};
use crate::error::{Error, Result};
use crate::schema::{ColumnDef, ColumnType, Predicate, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    CreateTable {
        name: String,
        columns: Vec<ColumnDef>,
    },
    DropTable {
        name: String,
    },
    Insert {
        table: String,
        values: Vec<Value>,
    },
    Select {
        table: String,
        predicate: Option<Predicate>,
    },
    Delete {
        table: String,
        predicate: Option<Predicate>,
    },
    GetByRowId {
        table: String,
        row_ordinal: u64,
    },
}

impl Statement {
    pub fn table(&self) -> &str {
        match self {
            Statement::CreateTable { name, .. } | Statement::DropTable { name } => name,
            Statement::Insert { table, .. }
            | Statement::Select { table, .. }
            | Statement::Delete { table, .. }
            | Statement::GetByRowId { table, .. } => table,
        }
    }
}

fn fmt_literal(v: &Value, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Value::Int(i) => write!(f, "{i}"),
        Value::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
    }
}

fn fmt_where(p: &Option<Predicate>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if let Some(p) = p {
        write!(f, " WHERE {} = ", p.column)?;
        fmt_literal(&p.value, f)?;
    }
    Ok(())
}

/// Canonical statement text; parsing it yields the same statement.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::CreateTable { name, columns } => {
                write!(f, "CREATE TABLE {name} (")?;
                for (i, c) in columns.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} {}", c.name, c.ty)?;
                }
                f.write_str(")")
            }
            Statement::DropTable { name } => write!(f, "DROP TABLE {name}"),
            Statement::Insert { table, values } => {
                write!(f, "INSERT INTO {table} VALUES (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    fmt_literal(v, f)?;
                }
                f.write_str(")")
            }
            Statement::Select { table, predicate } => {
                write!(f, "SELECT * FROM {table}")?;
                fmt_where(predicate, f)
            }
            Statement::Delete { table, predicate } => {
                write!(f, "DELETE FROM {table}")?;
                fmt_where(predicate, f)
            }
            Statement::GetByRowId { table, row_ordinal } => write!(f, "GET {table} {row_ordinal}"),
        }
    }
}

struct Parser<'t, 'a> {
    tokens: &'t [Token<'a>],
    pos: usize,
}

impl<'a> Parser<'_, 'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn error(&self, expected: &str) -> Error {
        let (found, offset) = match self.peek() {
            Some(t) => (format!("`{}`", t.text), t.position),
            None => (
                "end of input".to_owned(),
                self.tokens.last().map_or(0, Token::end),
            ),
        };
        Error::Parse {
            expected: expected.to_owned(),
            found,
            offset,
        }
    }

    fn next_if(&mut self, kind: TokenKind) -> Option<Token<'a>> {
        let t = *self.peek()?;
        if t.kind == kind {
            self.pos += 1;
            Some(t)
        } else {
            None
        }
    }

    fn keyword(&mut self, k: Keyword) -> Result<()> {
        self.next_if(TokenKind::Keyword(k))
            .map(|_| ())
            .ok_or_else(|| self.error(k.as_str()))
    }

    fn symbol(&mut self, c: char) -> Result<()> {
        self.next_if(TokenKind::Symbol(c))
            .map(|_| ())
            .ok_or_else(|| self.error(&format!("`{c}`")))
    }

    fn ident(&mut self) -> Result<String> {
        self.next_if(TokenKind::Identifier)
            .map(|t| t.text.to_owned())
            .ok_or_else(|| self.error("identifier"))
    }

    fn int<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let err = self.error(what);
        let t = self.next_if(TokenKind::IntLiteral).ok_or(err)?;
        t.text.parse().map_err(|_| Error::Parse {
            expected: what.to_owned(),
            found: format!("`{}`", t.text),
            offset: t.position,
        })
    }

    fn literal(&mut self) -> Result<Value> {
        if let Some(t) = self.next_if(TokenKind::StringLiteral) {
            return Ok(Value::Str(t.string_value()));
        }
        if matches!(self.peek(), Some(t) if t.kind == TokenKind::IntLiteral) {
            return self.int("64-bit integer").map(Value::Int);
        }
        Err(self.error("literal"))
    }

    fn where_clause(&mut self) -> Result<Option<Predicate>> {
        if self.next_if(TokenKind::Keyword(Keyword::Where)).is_none() {
            return Ok(None);
        }
        let column = self.ident()?;
        self.symbol('=')?;
        let value = self.literal()?;
        Ok(Some(Predicate { column, value }))
    }

    /// Parses `item` repeatedly, separated by commas, up to the closing paren.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.symbol('(')?;
        let mut items = vec![item(self)?];
        loop {
            if self.next_if(TokenKind::Symbol(')')).is_some() {
                return Ok(items);
            }
            if self.next_if(TokenKind::Symbol(',')).is_none() {
                return Err(self.error("`,` or `)`"));
            }
            items.push(item(self)?);
        }
    }

    fn coldef(&mut self) -> Result<ColumnDef> {
        let name = self.ident()?;
        let ty = if self.next_if(TokenKind::Keyword(Keyword::Int)).is_some() {
            ColumnType::Int
        } else if self.next_if(TokenKind::Keyword(Keyword::Str)).is_some() {
            self.symbol('(')?;
            let width = self.int("string width")?;
            self.symbol(')')?;
            ColumnType::Str(width)
        } else {
            return Err(self.error("INT or STR"));
        };
        Ok(ColumnDef { name, ty })
    }

    fn statement(&mut self) -> Result<Statement> {
        let Some(first) = self.peek().copied() else {
            return Err(self.error("statement"));
        };
        let TokenKind::Keyword(k) = first.kind else {
            return Err(self.error("statement"));
        };
        self.pos += 1;
        Ok(match k {
            Keyword::Create => {
                self.keyword(Keyword::Table)?;
                let name = self.ident()?;
                let columns = self.list(Self::coldef)?;
                Statement::CreateTable { name, columns }
            }
            Keyword::Drop => {
                self.keyword(Keyword::Table)?;
                Statement::DropTable {
                    name: self.ident()?,
                }
            }
            Keyword::Insert => {
                self.keyword(Keyword::Into)?;
                let table = self.ident()?;
                self.keyword(Keyword::Values)?;
                let values = self.list(Self::literal)?;
                Statement::Insert { table, values }
            }
            Keyword::Select => {
                self.symbol('*')?;
                self.keyword(Keyword::From)?;
                let table = self.ident()?;
                let predicate = self.where_clause()?;
                Statement::Select { table, predicate }
            }
            Keyword::Delete => {
                self.keyword(Keyword::From)?;
                let table = self.ident()?;
                let predicate = self.where_clause()?;
                Statement::Delete { table, predicate }
            }
            Keyword::Get => {
                let table = self.ident()?;
                let row_ordinal = self.int("row ordinal")?;
                Statement::GetByRowId { table, row_ordinal }
            }
            _ => {
                self.pos -= 1;
                return Err(self.error("statement"));
            }
        })
    }
}

pub fn parse(tokens: &[Token<'_>]) -> Result<Statement> {
    let mut parser = Parser { tokens, pos: 0 };
    let stmt = parser.statement()?;
    if parser.peek().is_some() {
        return Err(parser.error("end of statement"));
    }
    Ok(stmt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::lexer::tokenize;
    use proptest::prelude::*;

    fn parse_str(s: &str) -> Result<Statement> {
        parse(&tokenize(s)?)
    }

    #[test]
    fn create_table() {
        assert_eq!(
            parse_str("CREATE TABLE users (id INT, name STR(20))").unwrap(),
            Statement::CreateTable {
                name: "users".into(),
                columns: vec![
                    ColumnDef::new("id", ColumnType::Int),
                    ColumnDef::new("name", ColumnType::Str(20)),
                ],
            }
        );
    }

    #[test]
    fn select_with_where() {
        assert_eq!(
            parse_str("SELECT * FROM t WHERE a = 5").unwrap(),
            Statement::Select {
                table: "t".into(),
                predicate: Some(Predicate::new("a", 5)),
            }
        );
    }

    #[test]
    fn missing_comma_in_values() {
        match parse_str("INSERT INTO t VALUES (1 2)") {
            Err(Error::Parse {
                expected,
                found,
                offset,
            }) => {
                assert_eq!(expected, "`,` or `)`");
                assert_eq!(found, "`2`");
                assert_eq!(offset, 24);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_statements() {
        assert_eq!(
            parse_str("drop table x").unwrap(),
            Statement::DropTable { name: "x".into() }
        );
        assert_eq!(
            parse_str("DELETE FROM t WHERE s = 'a''b'").unwrap(),
            Statement::Delete {
                table: "t".into(),
                predicate: Some(Predicate::new("s", "a'b")),
            }
        );
        assert_eq!(
            parse_str("GET bench 42").unwrap(),
            Statement::GetByRowId {
                table: "bench".into(),
                row_ordinal: 42,
            }
        );
        assert_eq!(
            parse_str("INSERT INTO t VALUES (-1, 'x')").unwrap(),
            Statement::Insert {
                table: "t".into(),
                values: vec![Value::Int(-1), Value::from("x")],
            }
        );
    }

    #[test]
    fn rejections() {
        for bad in [
            "",
            "SELEC",
            "SELECT * FROM t extra",
            "GET t -1",
            "INSERT INTO t VALUES ()",
            "INSERT INTO t VALUES (99999999999999999999)",
            "CREATE TABLE t (a FLOAT)",
            "CREATE TABLE t (a STR(70000))",
            "SELECT * FROM t WHERE a 5",
            "INT",
        ] {
            let err = parse_str(bad).unwrap_err();
            assert!(err.is_syntax(), "{bad}: {err}");
            assert!(err.offset().unwrap() <= bad.len());
        }
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,10}".prop_filter("keyword", |s| Keyword::lookup(s).is_none())
    }

    fn literal() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            "[a-zA-Z0-9 ;',]{0,12}".prop_map(Value::Str),
        ]
    }

    fn predicate() -> impl Strategy<Value = Option<Predicate>> {
        proptest::option::of(
            (ident(), literal()).prop_map(|(column, value)| Predicate { column, value }),
        )
    }

    pub(crate) fn statement() -> impl Strategy<Value = Statement> {
        let coltype = prop_oneof![Just(ColumnType::Int), (1u16..300).prop_map(ColumnType::Str)];
        prop_oneof![
            (ident(), proptest::collection::vec((ident(), coltype), 1..5)).prop_map(
                |(name, cols)| {
                    Statement::CreateTable {
                        name,
                        columns: cols
                            .into_iter()
                            .map(|(n, t)| ColumnDef::new(n, t))
                            .collect(),
                    }
                }
            ),
            ident().prop_map(|name| Statement::DropTable { name }),
            (ident(), proptest::collection::vec(literal(), 1..5))
                .prop_map(|(table, values)| Statement::Insert { table, values }),
            (ident(), predicate())
                .prop_map(|(table, predicate)| Statement::Select { table, predicate }),
            (ident(), predicate())
                .prop_map(|(table, predicate)| Statement::Delete { table, predicate }),
            (ident(), any::<u64>())
                .prop_map(|(table, row_ordinal)| Statement::GetByRowId { table, row_ordinal }),
        ]
    }

    proptest! {
        #[test]
        fn valid_statements_parse(stmt in statement()) {
            let text = stmt.to_string();
            prop_assert_eq!(parse_str(&text).unwrap(), stmt);
        }

        #[test]
        fn single_token_mutilation(stmt in statement(), pick in any::<prop::sample::Index>(), repl in 0usize..6) {
            let text = stmt.to_string();
            let tokens = tokenize(&text).unwrap();
            let victim = pick.index(tokens.len());
            let replacement = ["", "x", "1", "'s'", ",", "SELECT"][repl];
            let t = tokens[victim];
            let mutated = format!("{}{}{}", &text[..t.position], replacement, &text[t.end()..]);
            match parse_str(&mutated) {
                Ok(_) => {}
                Err(e) => {
                    let offset = e.offset().expect("syntax error carries an offset");
                    prop_assert!(offset <= mutated.len());
                }
            }
        }

        #[test]
        fn parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let text = String::from_utf8_lossy(&bytes);
            if let Ok(tokens) = tokenize(&text) {
                let _ = parse(&tokens);
            }
        }
    }
}
