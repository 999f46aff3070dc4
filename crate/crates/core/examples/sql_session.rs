// Tables, rows and the SQL subset, against a database on disk.

use hardpage::sql;
use hardpage::table::{Database, DbConfig};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let db = Database::open(dir.path(), DbConfig::default())?;

    sql::run(
        &db,
        "CREATE TABLE crew (id INT, name STR(16), role STR(12));
         INSERT INTO crew VALUES (1, 'Valentina', 'pilot');
         INSERT INTO crew VALUES (2, 'Yuri', 'engineer');
         INSERT INTO crew VALUES (3, 'Sally', 'pilot');
         DELETE FROM crew WHERE name = 'Yuri';
         INSERT INTO crew VALUES (4, 'Mae', 'medic')",
    )?;

    for rs in sql::run(&db, "SELECT * FROM crew WHERE role = 'pilot'; GET crew 1")? {
        println!("{}", rs.columns.join("\t"));
        print!("{rs}");
    }

    match sql::run(&db, "SELECT * FROM crew WHERE id = ") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    db.close()?;

    let db = Database::open(dir.path(), DbConfig::default())?;
    let meta = db.table_meta("crew")?;
    println!(
        "reopened: {} rows in {} page(s)",
        meta.record_count, meta.page_count
    );
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
