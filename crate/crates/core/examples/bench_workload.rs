// The insert and lookup benchmarks behind `hardpage bench-insert` and
// `hardpage bench-get`, at a small size.

use hardpage::shell::{self, BenchReport, Config, GetOptions};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = Config::new(dir.path());

    let insert = shell::bench_insert(&config, 5_000, 1)?;
    println!("{insert}");

    let opts = GetOptions {
        rows: 5_000,
        lookups: 500,
        seed: 1,
        readers: 1,
        cold: true,
    };
    let cold = shell::bench_get(&config, &opts)?;
    let warm = shell::bench_get(
        &config,
        &GetOptions {
            cold: false,
            readers: 4,
            ..opts
        },
    )?;
    println!("{cold}");
    println!("{warm}");

    let parsed: BenchReport = cold.to_string().parse().expect("report line parses");
    assert_eq!(parsed.count, 500);
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
