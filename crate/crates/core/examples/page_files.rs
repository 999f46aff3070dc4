// Slotted page files on disk: header, slots, ECC encoding, atomic
// replacement, and scrubbing a flipped bit back out.

use hardpage::fault;
use hardpage::page::{PageHeader, PageId, PageImage, PageStore, SLOT_OCCUPIED};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let store = PageStore::new(dir.path(), true);
    let pid = PageId::new(3, 300);

    let mut header = PageHeader::new(pid, 32);
    header.record_count = 1;
    let mut image = PageImage::new(header);
    image.slot_mut(0)[0] = SLOT_OCCUPIED;
    image.slot_mut(0)[1..12].copy_from_slice(b"first slot!");
    store.write_page(pid, &image)?;

    let path = store.path_of(pid);
    println!(
        "{} holds {} slots of {} bytes ({} bytes on disk)",
        path.strip_prefix(dir.path()).unwrap().display(),
        header.slot_count,
        header.slot_size,
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );

    fault::flip_bit(&path, 8 * 70)?;
    let read = store.read_page(pid)?;
    assert!(read.image == image);
    println!(
        "read after a flip: {} word corrected in memory",
        read.report.corrected_count
    );

    let report = store.scrub_page(pid)?;
    println!(
        "scrub rewrote the file, fixing {} word",
        report.corrected_count
    );
    assert_eq!(store.read_page(pid)?.report.corrected_count, 0);
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
