//! Column types, schemas and the fixed-width row encoding.
//!
//! A slot is one occupancy byte followed by each column in declaration order:
//! `INT` as 8 little-endian bytes, `STR(n)` as `n` bytes zero-padded.

use std::fmt;

use crate::error::{Error, Result};
use crate::page::SLOT_AREA_SIZE;

pub const MAX_NAME_LEN: usize = 24;
pub const MAX_COLUMNS: usize = 16;
pub const MAX_STR_WIDTH: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Str(u16),
}

impl ColumnType {
    pub fn width(self) -> usize {
        match self {
            ColumnType::Int => 8,
            ColumnType::Str(n) => n as usize,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int => f.write_str("INT"),
            ColumnType::Str(n) => write!(f, "STR({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub ty: ColumnType,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        ColumnDef {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

/// `column = literal` filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub column: String,
    pub value: Value,
}

impl Predicate {
    pub fn new(column: impl Into<String>, value: impl Into<Value>) -> Self {
        Predicate {
            column: column.into(),
            value: value.into(),
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    if !is_identifier(name) || name.len() > MAX_NAME_LEN {
        return Err(Error::SchemaViolation(format!(
            "{kind} name `{name}` must be an identifier of at most {MAX_NAME_LEN} bytes"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    name: String,
    columns: Vec<ColumnDef>,
    offsets: Vec<usize>,
    slot_size: usize,
}

impl TableSchema {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnDef>) -> Result<Self> {
        let name = name.into();
        check_name("table", &name)?;
        if columns.is_empty() || columns.len() > MAX_COLUMNS {
            return Err(Error::SchemaViolation(format!(
                "a table needs 1 to {MAX_COLUMNS} columns, got {}",
                columns.len()
            )));
        }
        let slot_size = 1 + columns.iter().map(|c| c.ty.width()).sum::<usize>();
        if slot_size > SLOT_AREA_SIZE {
            return Err(Error::RowTooLarge {
                slot_size,
                max: SLOT_AREA_SIZE,
            });
        }
        for (i, col) in columns.iter().enumerate() {
            check_name("column", &col.name)?;
            if let ColumnType::Str(n) = col.ty {
                if n == 0 || n as usize > MAX_STR_WIDTH {
                    return Err(Error::SchemaViolation(format!(
                        "STR width {n} of `{}` outside 1..={MAX_STR_WIDTH}",
                        col.name
                    )));
                }
            }
            if columns[..i].iter().any(|c| c.name == col.name) {
                return Err(Error::SchemaViolation(format!(
                    "duplicate column `{}`",
                    col.name
                )));
            }
        }
        let offsets = columns
            .iter()
            .scan(1, |off, c| {
                let here = *off;
                *off += c.ty.width();
                Some(here)
            })
            .collect();
        Ok(TableSchema {
            name,
            columns,
            offsets,
            slot_size,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn slot_size(&self) -> usize {
        self.slot_size
    }

    pub fn slots_per_page(&self) -> usize {
        crate::page::slots_per_page(self.slot_size)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| {
                Error::SchemaViolation(format!("unknown column `{name}` in `{}`", self.name))
            })
    }

    /// Encodes `values` into a full slot image (occupancy byte included).
    pub fn encode_row(&self, values: &[Value], slot: &mut [u8]) -> Result<()> {
        debug_assert_eq!(slot.len(), self.slot_size);
        if values.len() != self.columns.len() {
            return Err(Error::SchemaViolation(format!(
                "`{}` has {} columns, got {} values",
                self.name,
                self.columns.len(),
                values.len()
            )));
        }
        for ((col, value), &off) in self.columns.iter().zip(values).zip(&self.offsets) {
            let field = &mut slot[off..off + col.ty.width()];
            encode_field(col, value, field)?;
        }
        slot[0] = crate::page::SLOT_OCCUPIED;
        Ok(())
    }

    /// Decodes the columns of an occupied slot. `None` when the bytes cannot
    /// be a valid row (e.g. a string field that is not UTF-8).
    pub fn decode_row(&self, slot: &[u8]) -> Option<Vec<Value>> {
        self.columns
            .iter()
            .zip(&self.offsets)
            .map(|(col, &off)| {
                let field = &slot[off..off + col.ty.width()];
                match col.ty {
                    ColumnType::Int => {
                        Some(Value::Int(i64::from_le_bytes(field.try_into().unwrap())))
                    }
                    ColumnType::Str(_) => {
                        let end = field.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
                        let text = std::str::from_utf8(&field[..end]).ok()?;
                        if text.contains('\0') {
                            return None;
                        }
                        Some(Value::Str(text.to_owned()))
                    }
                }
            })
            .collect()
    }

    /// Resolves a predicate into a byte-level matcher over slots.
    pub fn compile_predicate(&self, pred: &Predicate) -> Result<FieldMatch> {
        let index = self.column_index(&pred.column)?;
        let col = &self.columns[index];
        let offset = self.offsets[index];
        let mut expected = vec![0u8; col.ty.width()];
        let matchable = match (&col.ty, &pred.value) {
            (ColumnType::Int, Value::Int(v)) => {
                expected.copy_from_slice(&v.to_le_bytes());
                true
            }
            (ColumnType::Str(n), Value::Str(s)) => {
                let fits = s.len() <= *n as usize && !s.contains('\0');
                if fits {
                    expected[..s.len()].copy_from_slice(s.as_bytes());
                }
                fits
            }
            (ty, v) => {
                return Err(Error::SchemaViolation(format!(
                    "cannot compare {ty} column `{}` with {v:?}",
                    col.name
                )))
            }
        };
        Ok(FieldMatch {
            offset,
            expected,
            matchable,
        })
    }
}

fn encode_field(col: &ColumnDef, value: &Value, field: &mut [u8]) -> Result<()> {
    match (col.ty, value) {
        (ColumnType::Int, Value::Int(v)) => field.copy_from_slice(&v.to_le_bytes()),
        (ColumnType::Str(n), Value::Str(s)) => {
            if s.len() > n as usize {
                return Err(Error::SchemaViolation(format!(
                    "string of {} bytes does not fit STR({n}) column `{}`",
                    s.len(),
                    col.name
                )));
            }
            if s.contains('\0') {
                return Err(Error::SchemaViolation(format!(
                    "NUL byte in string for column `{}`",
                    col.name
                )));
            }
            field.fill(0);
            field[..s.len()].copy_from_slice(s.as_bytes());
        }
        (ty, v) => {
            return Err(Error::SchemaViolation(format!(
                "{v:?} does not match {ty} column `{}`",
                col.name
            )))
        }
    }
    Ok(())
}

/// Compiled equality test on one fixed-width field.
#[derive(Debug, Clone)]
pub struct FieldMatch {
    offset: usize,
    expected: Vec<u8>,
    /// False when the literal can never match (a string wider than the column).
    matchable: bool,
}

impl FieldMatch {
    pub fn matches(&self, slot: &[u8]) -> bool {
        self.matchable && slot[self.offset..self.offset + self.expected.len()] == self.expected[..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users() -> TableSchema {
        TableSchema::new(
            "users",
            vec![
                ColumnDef::new("id", ColumnType::Int),
                ColumnDef::new("name", ColumnType::Str(20)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn slot_arithmetic() {
        let s = users();
        assert_eq!(s.slot_size(), 29);
        assert_eq!(s.slots_per_page(), 139);
    }

    #[test]
    fn oversized_rows_are_rejected_before_width_checks() {
        let err = TableSchema::new(
            "big",
            vec![
                ColumnDef::new("id", ColumnType::Int),
                ColumnDef::new("blob", ColumnType::Str(4030)),
            ],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::RowTooLarge {
                slot_size: 4039,
                ..
            }
        ));
        assert!(matches!(
            TableSchema::new("w", vec![ColumnDef::new("s", ColumnType::Str(256))]),
            Err(Error::SchemaViolation(_))
        ));
    }

    #[test]
    fn names_and_columns_are_validated() {
        let int = |n: &str| ColumnDef::new(n, ColumnType::Int);
        assert!(TableSchema::new("1abc", vec![int("a")]).is_err());
        assert!(TableSchema::new("t", vec![int("a"), int("a")]).is_err());
        assert!(TableSchema::new("t", vec![]).is_err());
        assert!(TableSchema::new("t", (0..17).map(|i| int(&format!("c{i}"))).collect()).is_err());
        assert!(TableSchema::new("a_very_long_table_name_xyz", vec![int("a")]).is_err());
        assert!(TableSchema::new("_ok", vec![int("a")]).is_ok());
    }

    #[test]
    fn row_round_trip() {
        let s = users();
        let row = vec![Value::Int(-42), Value::from("ada")];
        let mut slot = vec![0u8; s.slot_size()];
        s.encode_row(&row, &mut slot).unwrap();
        assert_eq!(slot[0], crate::page::SLOT_OCCUPIED);
        assert_eq!(&slot[1..9], &(-42i64).to_le_bytes());
        assert_eq!(&slot[9..12], b"ada");
        assert!(slot[12..].iter().all(|&b| b == 0));
        assert_eq!(s.decode_row(&slot).unwrap(), row);
    }

    #[test]
    fn row_type_errors() {
        let s = users();
        let mut slot = vec![0u8; s.slot_size()];
        for bad in [
            vec![Value::from("x"), Value::from("y")],
            vec![Value::Int(1)],
            vec![Value::Int(1), Value::from("x".repeat(21).as_str())],
            vec![Value::Int(1), Value::from("a\0b")],
        ] {
            assert!(matches!(
                s.encode_row(&bad, &mut slot),
                Err(Error::SchemaViolation(_))
            ));
        }
    }

    #[test]
    fn predicates_compare_padded_bytes() {
        let s = users();
        let mut slot = vec![0u8; s.slot_size()];
        s.encode_row(&[Value::Int(7), Value::from("bob")], &mut slot)
            .unwrap();
        assert!(s
            .compile_predicate(&Predicate::new("id", 7))
            .unwrap()
            .matches(&slot));
        assert!(!s
            .compile_predicate(&Predicate::new("id", 8))
            .unwrap()
            .matches(&slot));
        assert!(s
            .compile_predicate(&Predicate::new("name", "bob"))
            .unwrap()
            .matches(&slot));
        assert!(!s
            .compile_predicate(&Predicate::new("name", "bo"))
            .unwrap()
            .matches(&slot));
        let wide = "b".repeat(30);
        assert!(!s
            .compile_predicate(&Predicate::new("name", wide.as_str()))
            .unwrap()
            .matches(&slot));
        assert!(s.compile_predicate(&Predicate::new("nope", 1)).is_err());
        assert!(s.compile_predicate(&Predicate::new("id", "7")).is_err());
    }
}
