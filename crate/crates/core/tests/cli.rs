use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn hardpage(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardpage"))
        .arg("--root")
        .arg(root)
        .arg("--no-sync")
        .args(args)
        .env_remove("HARDPAGE_ROOT")
        .env_remove("HARDPAGE_CACHE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exec_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let o = hardpage(
        root,
        &[
            "exec",
            "-c",
            "CREATE TABLE t (a INT, b STR(8)); INSERT INTO t VALUES (5, 'five')",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = hardpage(root, &["exec", "-c", "SELECT * FROM t"]);
    assert_eq!(
        (o.status.code(), stdout(&o).as_str()),
        (Some(0), "5\tfive\n")
    );
    assert_eq!(
        hardpage(root, &["exec", "-c", "SELEC"]).status.code(),
        Some(1)
    );
    let o = hardpage(root, &["exec", "-c", "INSERT INTO missing VALUES (1)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
}

#[test]
fn repl_over_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_hardpage"))
        .args(["repl", "--no-sync", "--cache", "1"])
        .env("HARDPAGE_ROOT", dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"CREATE TABLE t (a INT);\nSELECT * FROM nope;\nINSERT INTO t VALUES (1); INSERT INTO t VALUES (2);\n\nSELECT * FROM t;\n.quit\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1\n2\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("`nope` not found"));
}

#[test]
fn bench_inject_scrub_stats() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let o = hardpage(root, &["stats"]);
    assert!(stdout(&o).contains("tables 0"));

    let o = hardpage(root, &["bench-insert", "--rows", "1000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let report: hardpage::shell::BenchReport = stdout(&o).trim().parse().unwrap();
    assert_eq!(report.count, 1000);
    assert_eq!(
        hardpage(root, &["bench-insert", "--rows", "10"])
            .status
            .code(),
        Some(2)
    );

    let o = hardpage(
        root,
        &[
            "bench-get",
            "--rows",
            "1000",
            "--lookups",
            "100",
            "--seed",
            "2",
            "--readers",
            "2",
        ],
    );
    let report: hardpage::shell::BenchReport = stdout(&o).trim().parse().unwrap();
    assert_eq!(report.count, 100);

    let o = hardpage(root, &["scrub"]);
    assert!(
        stdout(&o).contains("corrected 0 uncorrectable 0"),
        "{}",
        stdout(&o)
    );

    let o = hardpage(root, &["inject", "--flips", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let log = std::fs::read_to_string(root.join("inject.log")).unwrap();
    assert_eq!(log.lines().count(), 5);

    let o = hardpage(root, &["scrub"]);
    assert!(
        stdout(&o).contains("corrected 5 uncorrectable 0"),
        "{}",
        stdout(&o)
    );

    let o = hardpage(root, &["stats"]);
    assert!(
        stdout(&o).contains("bench records 1000 pages 10"),
        "{}",
        stdout(&o)
    );
}
