// Simulated single-event upsets: flip bits in the page files of a live
// dataset, check nothing was lost, then scrub the damage away.

use hardpage::fault::{self, FlipCount, InjectionPlan};
use hardpage::shell::{self, Config};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = Config::new(dir.path());
    shell::bench_insert(&config, 1000, 7)?;

    let snapshot = fault::snapshot(dir.path())?;
    let plan = InjectionPlan {
        seed: 2024,
        flips: FlipCount::PerFile(1),
    };
    let records = fault::inject(dir.path(), &plan)?;
    for r in records.iter().take(3) {
        print!("{}", r.audit_line(dir.path()));
    }
    println!("... {} flips in total", records.len());

    let report = fault::verify(dir.path(), &snapshot);
    println!("after injection: {report}");
    assert!(report.is_clean());

    let scrub = fault::scrub_all(dir.path())?;
    println!(
        "scrub: {} pages, {} corrected",
        scrub.pages, scrub.corrected
    );

    let page = dir.path().join("t0/d0/p4.pg");
    fault::flip_bit(&page, fault::codeword_bit_offset(40, 1))?;
    fault::flip_bit(&page, fault::codeword_bit_offset(40, 2))?;
    let report = fault::verify(dir.path(), &snapshot);
    println!("two flips in one codeword: {report}");
    assert_eq!(report.mismatched, 0);
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
