//! Operator commands behind the `hardpage` binary: REPL, one-shot execution,
//! benchmarks, fault injection, scrubbing and statistics. Every command
//! writes to caller-supplied streams so it can be driven from tests.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{DEFAULT_CAPACITY, DEFAULT_OVERFLOW};
use crate::error::{Error, Result};
use crate::fault::{self, InjectionPlan};
use crate::sql::{self, ResultSet};
use crate::table::{Database, DbConfig};

pub const BENCH_TABLE: &str = "bench";
pub const BENCH_PAYLOAD_LEN: usize = 20;
pub const AUDIT_LOG: &str = "inject.log";

pub const EXIT_OK: i32 = 0;
pub const EXIT_SYNTAX: i32 = 1;
pub const EXIT_EXEC: i32 = 2;

#[derive(Debug, Clone)]
pub struct Config {
    pub storage_root: PathBuf,
    pub cache_capacity: usize,
    pub overflow_capacity: usize,
    pub sync_writes: bool,
}

impl Config {
    pub fn new(storage_root: impl Into<PathBuf>) -> Self {
        Config {
            storage_root: storage_root.into(),
            cache_capacity: DEFAULT_CAPACITY,
            overflow_capacity: DEFAULT_OVERFLOW,
            sync_writes: true,
        }
    }

    pub fn db_config(&self) -> DbConfig {
        DbConfig {
            cache_capacity: self.cache_capacity,
            overflow_capacity: self.overflow_capacity,
            sync_writes: self.sync_writes,
        }
    }

    pub fn open(&self) -> Result<Database> {
        if self.cache_capacity == 0 || self.overflow_capacity == 0 {
            return Err(Error::InvalidPoolConfig {
                block_count: 0,
                block_size: crate::ecc::BLOCK_SIZE,
            });
        }
        Database::open(&self.storage_root, self.db_config())
    }
}

fn report_error(err: &mut dyn Write, e: &Error, statement: Option<&str>) {
    let _ = writeln!(err, "error: {e}");
    if let (Some(text), Some(offset)) = (statement, e.offset()) {
        let _ = writeln!(err, "  {text}");
        let _ = writeln!(
            err,
            "  {}^",
            " ".repeat(text[..offset.min(text.len())].chars().count())
        );
    }
}

fn print_result(out: &mut dyn Write, rs: &ResultSet) -> std::io::Result<()> {
    write!(out, "{rs}")
}

/// Runs every directive of `text`, stopping at the first failure.
fn run_text(db: &Database, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let directives = match sql::split_statements(text) {
        Ok(d) => d,
        Err(e) => {
            report_error(err, &e, Some(text));
            return EXIT_SYNTAX;
        }
    };
    let mut parsed = Vec::with_capacity(directives.len());
    for d in &directives {
        match sql::parse_statement(d) {
            Ok(stmt) => parsed.push(stmt),
            Err(e) => {
                report_error(err, &e, Some(d));
                return EXIT_SYNTAX;
            }
        }
    }
    for stmt in &parsed {
        match sql::execute(db, stmt) {
            Ok(rs) => {
                if print_result(out, &rs).is_err() {
                    return EXIT_EXEC;
                }
            }
            Err(e) => {
                report_error(err, &e, None);
                return EXIT_EXEC;
            }
        }
    }
    EXIT_OK
}

/// Interactive loop. Each input line is split into directives and run;
/// `.quit` or end of input exits. Statement errors are reported and the
/// loop goes on.
pub fn repl(
    config: &Config,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let db = match config.open() {
        Ok(db) => db,
        Err(e) => {
            report_error(err, &e, None);
            return EXIT_EXEC;
        }
    };
    let mut line = String::new();
    loop {
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                break;
            }
        }
        let text = line.trim();
        if text == ".quit" {
            break;
        }
        if !text.is_empty() {
            run_text(&db, text, out, err);
        }
        let _ = out.flush();
    }
    match db.close() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(err, &e, None);
            EXIT_EXEC
        }
    }
}

/// One-shot execution: 0 on success, 1 on a lex or parse error (nothing is
/// executed), 2 on an execution error.
pub fn exec(config: &Config, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let db = match config.open() {
        Ok(db) => db,
        Err(e) => {
            report_error(err, &e, None);
            return EXIT_EXEC;
        }
    };
    let code = run_text(&db, text, out, err);
    match db.close() {
        Ok(()) => code,
        Err(e) => {
            report_error(err, &e, None);
            EXIT_EXEC
        }
    }
}

/// Timing summary, printed as one line:
/// `<name> count=<n> total_s=<t> mean_s=<m> ops_s=<r>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub name: String,
    pub count: u64,
    pub total_s: f64,
    pub mean_s: f64,
    pub ops_s: f64,
}

impl BenchReport {
    fn new(name: &str, count: u64, total: Duration, ops_s: f64) -> Self {
        let total_s = total.as_secs_f64();
        BenchReport {
            name: name.to_owned(),
            count,
            total_s,
            mean_s: if count == 0 {
                0.0
            } else {
                total_s / count as f64
            },
            ops_s,
        }
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} count={} total_s={:.6} mean_s={:.6} ops_s={:.1}",
            self.name, self.count, self.total_s, self.mean_s, self.ops_s
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseReportError(String);

impl fmt::Display for ParseReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed bench report: {}", self.0)
    }
}

impl std::error::Error for ParseReportError {}

impl FromStr for BenchReport {
    type Err = ParseReportError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || ParseReportError(s.to_owned());
        let mut parts = s.split_whitespace();
        let name = parts.next().ok_or_else(bad)?.to_owned();
        let mut field = |key: &str| -> std::result::Result<&str, ParseReportError> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(key)?.strip_prefix('='))
                .ok_or_else(bad)
        };
        let count = field("count")?.parse().map_err(|_| bad())?;
        let total_s = field("total_s")?.parse().map_err(|_| bad())?;
        let mean_s = field("mean_s")?.parse().map_err(|_| bad())?;
        let ops_s = field("ops_s")?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(BenchReport {
            name,
            count,
            total_s,
            mean_s,
            ops_s,
        })
    }
}

fn rate(count: u64, elapsed: Duration) -> f64 {
    if count == 0 || elapsed.is_zero() {
        0.0
    } else {
        count as f64 / elapsed.as_secs_f64()
    }
}

/// The `INSERT` directive for bench record `id`. Successive calls with the
/// same generator yield the same records.
pub fn bench_record(id: u64, rng: &mut ChaCha8Rng) -> String {
    let payload: String = rng
        .sample_iter(Alphanumeric)
        .take(BENCH_PAYLOAD_LEN)
        .map(char::from)
        .collect();
    let val: i64 = rng.gen();
    format!("INSERT INTO {BENCH_TABLE} VALUES ({id}, '{payload}', {val})")
}

/// Creates the bench table and inserts `rows` records through the SQL front
/// end. The timed span covers the inserts and the final flush.
pub fn bench_insert(config: &Config, rows: u64, seed: u64) -> Result<BenchReport> {
    let db = config.open()?;
    if db.table_names().iter().any(|n| n == BENCH_TABLE) {
        return Err(Error::BenchTableExists);
    }
    sql::run(
        &db,
        &format!("CREATE TABLE {BENCH_TABLE} (id INT, payload STR({BENCH_PAYLOAD_LEN}), val INT)"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    for id in 0..rows {
        let stmt = sql::parse_statement(&bench_record(id, &mut rng))?;
        sql::execute(&db, &stmt)?;
    }
    db.flush()?;
    let elapsed = start.elapsed();
    db.close()?;
    Ok(BenchReport::new(
        "bench-insert",
        rows,
        elapsed,
        rate(rows, elapsed),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GetOptions {
    pub rows: u64,
    pub lookups: u64,
    pub seed: u64,
    /// Concurrent reader threads; lookups are split between them.
    pub readers: usize,
    /// Empty the page cache before every lookup (untimed) so each one reads
    /// its page from storage.
    pub cold: bool,
}

/// Row ordinals visited by `bench_get`, drawn uniformly from `0..rows`.
pub fn bench_ordinals(rows: u64, lookups: u64, seed: u64) -> Vec<u64> {
    if rows == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lookups).map(|_| rng.gen_range(0..rows)).collect()
}

/// Runs `GET bench <ordinal>` lookups. `total_s` is the summed latency of
/// the lookups themselves; `ops_s` is lookups per second of wall time.
pub fn bench_get(config: &Config, opts: &GetOptions) -> Result<BenchReport> {
    let db = config.open()?;
    db.table_meta(BENCH_TABLE)?;
    let ordinals = bench_ordinals(opts.rows, opts.lookups, opts.seed);
    if ordinals.len() as u64 != opts.lookups {
        return Err(Error::SchemaViolation(format!(
            "cannot run {} lookups over {} rows",
            opts.lookups, opts.rows
        )));
    }
    let readers = opts.readers.max(1);
    let chunk = ordinals.len().div_ceil(readers).max(1);
    let wall = Instant::now();
    let busy = std::thread::scope(|s| {
        let workers: Vec<_> = ordinals
            .chunks(chunk)
            .map(|part| s.spawn(|| get_worker(&db, part, opts.cold)))
            .collect();
        workers
            .into_iter()
            .map(|w| w.join().expect("reader thread panicked"))
            .try_fold(Duration::ZERO, |acc, r| r.map(|d| acc + d))
    })?;
    let elapsed = wall.elapsed();
    db.close()?;
    Ok(BenchReport::new(
        "bench-get",
        opts.lookups,
        busy,
        rate(opts.lookups, elapsed),
    ))
}

fn get_worker(db: &Database, ordinals: &[u64], cold: bool) -> Result<Duration> {
    let mut busy = Duration::ZERO;
    for ord in ordinals {
        if cold {
            db.drop_cache()?;
        }
        let start = Instant::now();
        let stmt = sql::parse_statement(&format!("GET {BENCH_TABLE} {ord}"))?;
        let rs = sql::execute(db, &stmt)?;
        busy += start.elapsed();
        debug_assert_eq!(rs.rows.len(), 1);
    }
    Ok(busy)
}

/// Injects `plan` and writes the audit log (default `<root>/inject.log`).
pub fn inject(
    config: &Config,
    plan: &InjectionPlan,
    log: Option<&Path>,
    out: &mut dyn Write,
) -> Result<usize> {
    let root = &config.storage_root;
    let records = fault::inject(root, plan)?;
    let log_path = log.map_or_else(|| root.join(AUDIT_LOG), Path::to_path_buf);
    let file = File::create(&log_path).map_err(|e| Error::storage(&log_path, e))?;
    let mut w = BufWriter::new(file);
    for r in &records {
        w.write_all(r.audit_line(root).as_bytes())
            .map_err(|e| Error::storage(&log_path, e))?;
    }
    w.flush().map_err(|e| Error::storage(&log_path, e))?;
    let _ = writeln!(
        out,
        "injected {} flips, audit log {}",
        records.len(),
        log_path.display()
    );
    Ok(records.len())
}

/// Scrubs every page file and prints `pages <n> corrected <c> uncorrectable <u>`.
pub fn scrub(
    config: &Config,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<fault::ScrubSummary> {
    let summary = fault::scrub_all(&config.storage_root)?;
    for (path, e) in &summary.failed {
        let _ = writeln!(err, "{}: {e}", path.display());
    }
    let _ = writeln!(
        out,
        "pages {} corrected {} uncorrectable {}",
        summary.pages, summary.corrected, summary.uncorrectable
    );
    Ok(summary)
}

/// Prints cache statistics and one line per table.
pub fn stats(config: &Config, out: &mut dyn Write) -> Result<()> {
    let db = config.open()?;
    let s = db.cache_stats();
    let names = db.table_names();
    let w = |e| Error::storage(&config.storage_root, e);
    writeln!(
        out,
        "cache capacity {} resident {} pinned {} hits {} misses {} evictions {} overflow_peak {}",
        s.capacity, s.resident, s.pinned, s.hits, s.misses, s.evictions, s.overflow_peak
    )
    .map_err(w)?;
    writeln!(out, "tables {}", names.len()).map_err(w)?;
    for name in names {
        let meta = db.table_meta(&name)?;
        writeln!(
            out,
            "{name} records {} pages {} slot_size {}",
            meta.record_count,
            meta.page_count,
            meta.schema.slot_size()
        )
        .map_err(w)?;
    }
    db.close()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FlipCount;
    use tempfile::TempDir;

    fn config(dir: &TempDir) -> Config {
        Config {
            sync_writes: false,
            ..Config::new(dir.path())
        }
    }

    fn exec_str(cfg: &Config, text: &str) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = exec(cfg, text, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn exec_exit_codes() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        let (code, _, _) = exec_str(
            &cfg,
            "CREATE TABLE t (a INT, b STR(4)); INSERT INTO t VALUES (1, 'x')",
        );
        assert_eq!(code, EXIT_OK);
        let (code, out, _) = exec_str(&cfg, "SELECT * FROM t");
        assert_eq!((code, out.as_str()), (EXIT_OK, "1\tx\n"));
        let (code, _, err) = exec_str(&cfg, "SELEC");
        assert_eq!(code, EXIT_SYNTAX);
        assert!(err.contains("offset 0"), "{err}");
        let (code, _, err) = exec_str(&cfg, "INSERT INTO missing VALUES (1)");
        assert_eq!(code, EXIT_EXEC);
        assert!(err.contains("missing"));
        // a syntax error anywhere means nothing runs
        let (code, _, _) = exec_str(&cfg, "INSERT INTO t VALUES (2, 'y'); SELEC");
        assert_eq!(code, EXIT_SYNTAX);
        assert_eq!(exec_str(&cfg, "SELECT * FROM t").1, "1\tx\n");
    }

    #[test]
    fn repl_session() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        let script = "CREATE TABLE t (a INT);\n\nSELECT * FROM missing;\nINSERT INTO t VALUES (7);\nSELECT * FROM t;\n.quit\nSELECT * FROM t;\n";
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = repl(&cfg, &mut script.as_bytes(), &mut out, &mut err);
        assert_eq!(code, EXIT_OK);
        assert_eq!(String::from_utf8(out).unwrap(), "7\n");
        let err = String::from_utf8(err).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.contains("`missing` not found"));
    }

    #[test]
    fn repl_shows_error_position() {
        let dir = TempDir::new().unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        repl(
            &config(&dir),
            &mut "SELECT * FROM t WHERE a = \n".as_bytes(),
            &mut out,
            &mut err,
        );
        let err = String::from_utf8(err).unwrap();
        let lines: Vec<_> = err.lines().collect();
        assert_eq!(lines.len(), 3, "{err}");
        assert_eq!(
            lines[2].find('^'),
            Some(2 + "SELECT * FROM t WHERE a =".len())
        );
    }

    #[test]
    fn report_format_round_trips() {
        let r = BenchReport::new("bench-get", 4, Duration::from_micros(10), 1000.0);
        let line = r.to_string();
        assert_eq!(
            line,
            "bench-get count=4 total_s=0.000010 mean_s=0.000003 ops_s=1000.0"
        );
        let parsed: BenchReport = line.parse().unwrap();
        assert_eq!(parsed.count, 4);
        assert!((parsed.total_s - parsed.mean_s * 4.0).abs() < 1e-5);
        assert!("bench-get count=4".parse::<BenchReport>().is_err());
        assert!("x count=1 total_s=1 mean_s=1 ops_s=1 extra"
            .parse::<BenchReport>()
            .is_err());
    }

    #[test]
    fn bench_insert_and_get() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        let r = bench_insert(&cfg, 1000, 3).unwrap();
        assert_eq!(r.count, 1000);
        assert!(r.ops_s > 0.0);
        assert!(matches!(
            bench_insert(&cfg, 10, 3),
            Err(Error::BenchTableExists)
        ));
        let meta = cfg.open().unwrap().table_meta(BENCH_TABLE).unwrap();
        assert_eq!((meta.record_count, meta.schema.slot_size()), (1000, 37));

        let opts = GetOptions {
            rows: 1000,
            lookups: 100,
            seed: 5,
            readers: 1,
            cold: false,
        };
        let g = bench_get(&cfg, &opts).unwrap();
        assert_eq!(g.count, 100);
        let g = bench_get(
            &cfg,
            &GetOptions {
                readers: 4,
                cold: true,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(g.count, 100);
        assert!(bench_get(
            &cfg,
            &GetOptions {
                rows: 2000,
                lookups: 1000,
                ..opts
            }
        )
        .is_err());
    }

    #[test]
    fn bench_is_deterministic() {
        let trees: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|_| {
                let dir = TempDir::new().unwrap();
                bench_insert(&config(&dir), 500, 42).unwrap();
                fault::page_files(dir.path())
                    .unwrap()
                    .into_iter()
                    .map(|p| {
                        let rel = p
                            .strip_prefix(dir.path())
                            .unwrap()
                            .to_string_lossy()
                            .into_owned();
                        (rel, std::fs::read(&p).unwrap())
                    })
                    .collect()
            })
            .collect();
        assert_eq!(trees[0], trees[1]);
        assert_eq!(bench_ordinals(1000, 50, 8), bench_ordinals(1000, 50, 8));
    }

    #[test]
    fn empty_bench() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        assert_eq!(bench_insert(&cfg, 0, 0).unwrap().count, 0);
        let missing = TempDir::new().unwrap();
        let opts = GetOptions {
            rows: 10,
            lookups: 1,
            seed: 0,
            readers: 1,
            cold: false,
        };
        assert!(matches!(
            bench_get(&config(&missing), &opts),
            Err(Error::TableNotFound(_))
        ));
    }

    #[test]
    fn maintenance_commands() {
        let dir = TempDir::new().unwrap();
        let cfg = config(&dir);
        let mut out = Vec::new();
        stats(&cfg, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("tables 0"));

        bench_insert(&cfg, 300, 1).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let s = scrub(&cfg, &mut out, &mut err).unwrap();
        assert_eq!(s.corrected, 0);
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("pages 5 corrected 0"));

        let plan = InjectionPlan {
            seed: 1,
            flips: FlipCount::Total(5),
        };
        let mut out = Vec::new();
        assert_eq!(inject(&cfg, &plan, None, &mut out).unwrap(), 5);
        let log = std::fs::read_to_string(dir.path().join(AUDIT_LOG)).unwrap();
        assert_eq!(log.lines().count(), 5);
        assert!(log
            .lines()
            .all(|l| fault::FlipRecord::parse_audit_line(dir.path(), l).is_some()));

        let mut out = Vec::new();
        stats(&cfg, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(
            text.contains("tables 1\nbench records 300 pages 3 slot_size 37"),
            "{text}"
        );
    }
}
