use std::fmt;

use super::parser::Statement;
use crate::error::{Error, Result};
use crate::schema::Value;
use crate::table::{Database, RowId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Rows created or removed by a mutation.
    pub affected: Option<u64>,
}

impl ResultSet {
    fn affected(n: u64) -> Self {
        ResultSet {
            affected: Some(n),
            ..ResultSet::default()
        }
    }
}

/// Rows as tab-separated lines.
impl fmt::Display for ResultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    f.write_str("\t")?;
                }
                first = false;
                write!(f, "{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn execute(db: &Database, stmt: &Statement) -> Result<ResultSet> {
    match stmt {
        Statement::CreateTable { name, columns } => {
            db.create_table(name, columns.clone())?;
            Ok(ResultSet::affected(0))
        }
        Statement::DropTable { name } => {
            db.drop_table(name)?;
            Ok(ResultSet::affected(0))
        }
        Statement::Insert { table, values } => {
            db.insert_row(table, values)?;
            Ok(ResultSet::affected(1))
        }
        Statement::Select { table, predicate } => {
            let columns = db.table_meta(table)?.schema.column_names();
            let rows = db
                .scan(table, predicate.as_ref())?
                .into_iter()
                .map(|(_, row)| row)
                .collect();
            Ok(ResultSet {
                columns,
                rows,
                affected: None,
            })
        }
        Statement::Delete { table, predicate } => db
            .delete_where(table, predicate.as_ref())
            .map(ResultSet::affected),
        Statement::GetByRowId { table, row_ordinal } => {
            let schema = db.table_meta(table)?.schema;
            let rid = RowId::from_ordinal(*row_ordinal, schema.slots_per_page())
                .ok_or(Error::RowNotFound(RowId::new(u32::MAX, 0)))?;
            let row = db.get_row(table, rid)?;
            Ok(ResultSet {
                columns: schema.column_names(),
                rows: vec![row],
                affected: None,
            })
        }
    }
}

/// Parses every directive in `input`, then executes them in order. Nothing
/// runs if any directive fails to parse; execution stops at the first error.
pub fn run(db: &Database, input: &str) -> Result<Vec<ResultSet>> {
    super::parse_script(input)?
        .iter()
        .map(|stmt| execute(db, stmt))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::DbConfig;
    use tempfile::TempDir;

    fn db(dir: &TempDir) -> Database {
        Database::open(
            dir.path(),
            DbConfig {
                sync_writes: false,
                ..DbConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn select_after_inserts() {
        let dir = TempDir::new().unwrap();
        let db = db(&dir);
        run(
            &db,
            "CREATE TABLE t (id INT, val INT); INSERT INTO t VALUES (0, 5);",
        )
        .unwrap();
        run(
            &db,
            "INSERT INTO t VALUES (1, 7); INSERT INTO t VALUES (2, 7)",
        )
        .unwrap();
        let out = run(&db, "SELECT * FROM t").unwrap();
        assert_eq!(out[0].columns, vec!["id", "val"]);
        assert_eq!(out[0].rows.len(), 3);
        assert_eq!(out[0].to_string(), "0\t5\n1\t7\n2\t7\n");
        let out = run(&db, "DELETE FROM t WHERE val = 7").unwrap();
        assert_eq!(out[0].affected, Some(2));
        assert_eq!(run(&db, "SELECT * FROM t").unwrap()[0].rows.len(), 1);
    }

    #[test]
    fn get_by_ordinal() {
        let dir = TempDir::new().unwrap();
        let db = db(&dir);
        run(&db, "CREATE TABLE t (id INT, name STR(20))").unwrap();
        for i in 0..150 {
            run(&db, &format!("INSERT INTO t VALUES ({i}, 'n{i}')")).unwrap();
        }
        let out = run(&db, "GET t 140").unwrap();
        assert_eq!(
            out[0].rows,
            vec![vec![Value::Int(140), Value::from("n140")]]
        );
        assert!(matches!(run(&db, "GET t 150"), Err(Error::RowNotFound(_))));
        assert!(matches!(
            run(&db, "GET t 18446744073709551615"),
            Err(Error::RowNotFound(_))
        ));
    }

    #[test]
    fn errors_surface_verbatim() {
        let dir = TempDir::new().unwrap();
        let db = db(&dir);
        assert!(matches!(
            run(&db, "INSERT INTO missing VALUES (1)"),
            Err(Error::TableNotFound(_))
        ));
        run(&db, "CREATE TABLE t (a INT)").unwrap();
        assert!(matches!(
            run(&db, "INSERT INTO t VALUES ('x')"),
            Err(Error::SchemaViolation(_))
        ));
        // a syntax error anywhere means nothing runs
        assert!(run(&db, "INSERT INTO t VALUES (1); SELEC")
            .unwrap_err()
            .is_syntax());
        assert!(run(&db, "SELECT * FROM t").unwrap()[0].rows.is_empty());
    }
}
