use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hardpage::fault::{FlipCount, InjectionPlan};
use hardpage::shell::{self, Config, GetOptions, EXIT_EXEC};

#[derive(Parser)]
#[command(
    name = "hardpage",
    version,
    about = "Fault-tolerant embedded page store"
)]
struct Cli {
    /// Storage root directory.
    #[arg(
        long,
        env = "HARDPAGE_ROOT",
        default_value = "hardpage-data",
        global = true
    )]
    root: PathBuf,
    /// Page cache capacity in frames.
    #[arg(long, env = "HARDPAGE_CACHE", default_value_t = hardpage::cache::DEFAULT_CAPACITY,
          value_parser = positive, global = true)]
    cache: usize,
    /// Overflow buffers used when every frame is pinned.
    #[arg(long, default_value_t = hardpage::cache::DEFAULT_OVERFLOW,
          value_parser = positive, global = true)]
    overflow: usize,
    /// Skip fsync before publishing page files.
    #[arg(long, global = true)]
    no_sync: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive statement loop; `.quit` exits.
    Repl,
    /// Run statements and exit (0 ok, 1 syntax error, 2 execution error).
    Exec {
        #[arg(short = 'c', long = "command")]
        text: String,
    },
    /// Create the bench table and time inserting rows into it.
    BenchInsert {
        #[arg(long)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time GET lookups at random ordinals of the bench table.
    BenchGet {
        #[arg(long)]
        rows: u64,
        #[arg(long, default_value_t = 1000)]
        lookups: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        readers: usize,
        /// Empty the cache before every lookup.
        #[arg(long)]
        cold: bool,
    },
    /// Flip random bits in page files and write an audit log.
    Inject {
        /// Total flips over all page files.
        #[arg(
            long,
            conflicts_with = "per_file",
            required_unless_present = "per_file"
        )]
        flips: Option<usize>,
        /// Flips in every page file.
        #[arg(long)]
        per_file: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Audit log path (default: <root>/inject.log).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check and repair every page file.
    Scrub,
    /// Print cache statistics and table record counts.
    Stats,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = Config {
        storage_root: cli.root,
        cache_capacity: cli.cache,
        overflow_capacity: cli.overflow,
        sync_writes: !cli.no_sync,
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let result = match cli.command {
        Command::Repl => Ok(shell::repl(
            &config,
            &mut io::stdin().lock(),
            &mut out,
            &mut err,
        )),
        Command::Exec { text } => Ok(shell::exec(&config, &text, &mut out, &mut err)),
        Command::BenchInsert { rows, seed } => shell::bench_insert(&config, rows, seed).map(|r| {
            let _ = writeln!(out, "{r}");
            0
        }),
        Command::BenchGet {
            rows,
            lookups,
            seed,
            readers,
            cold,
        } => {
            let opts = GetOptions {
                rows,
                lookups,
                seed,
                readers,
                cold,
            };
            shell::bench_get(&config, &opts).map(|r| {
                let _ = writeln!(out, "{r}");
                0
            })
        }
        Command::Inject {
            flips,
            per_file,
            seed,
            log,
        } => {
            let flips = match (flips, per_file) {
                (_, Some(n)) => FlipCount::PerFile(n),
                (Some(n), None) => FlipCount::Total(n),
                (None, None) => unreachable!("clap requires one of them"),
            };
            shell::inject(
                &config,
                &InjectionPlan { seed, flips },
                log.as_deref(),
                &mut out,
            )
            .map(|_| 0)
        }
        Command::Scrub => {
            shell::scrub(&config, &mut out, &mut err).map(|s| i32::from(!s.failed.is_empty()))
        }
        Command::Stats => shell::stats(&config, &mut out).map(|_| 0),
    };
    let code = result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_EXEC
    });
    ExitCode::from(code as u8)
}
