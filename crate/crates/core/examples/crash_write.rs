// Page writes go to a temp file that is renamed over the old page, so a
// crash at any point leaves the old page or the new one, never a torn one.

use hardpage::fault;
use hardpage::page::{CrashPoint, PageHeader, PageId, PageImage, PageStore};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let store = PageStore::new(dir.path(), true);
    let pid = PageId::new(0, 0);

    let mut old = PageImage::new(PageHeader::new(pid, 16));
    old.slot_mut(0)[1] = 1;
    store.write_page(pid, &old)?;
    let mut new = PageImage::new(PageHeader::new(pid, 16));
    new.slot_mut(0)[1] = 2;

    store.write_page_interrupted(pid, &new, CrashPoint::AfterBytes(2000))?;
    assert!(store.read_page(pid)?.image == old);
    println!("crash mid-write: old page still intact");

    store.write_page_interrupted(pid, &new, CrashPoint::AfterRename)?;
    assert!(store.read_page(pid)?.image == new);
    println!("crash after rename: new page visible");

    let verdict = fault::crash_write_test(dir.path())?;
    println!(
        "exhaustive check: {} interruption points, {} failures",
        verdict.points_tested,
        verdict.failures.len()
    );
    assert!(verdict.passed());
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
