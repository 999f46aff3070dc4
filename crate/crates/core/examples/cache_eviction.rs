// The page cache: pin/unpin, clock second-chance eviction, and the
// overflow buffers that serve requests when every frame is pinned.

use hardpage::cache::{CacheKey, PageCache};
use hardpage::page::{PageHeader, PageImage, PageStore};

pub fn run_example() -> hardpage::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let store = PageStore::new(dir.path(), false);
    let keys: Vec<CacheKey> = (0..3).map(|i| CacheKey::table_page(0, i)).collect();
    for key in &keys {
        store.write_page(
            key.page_id(),
            &PageImage::new(PageHeader::new(key.page_id(), 64)),
        )?;
    }
    let cache = PageCache::new(store, 2, 1)?;
    let [a, b, c] = [keys[0], keys[1], keys[2]];

    for key in [a, b, a, c] {
        let page = cache.fetch(key)?;
        cache.unpin(page.key(), false)?;
    }
    println!(
        "after A B A C: A cached {}, B cached {}",
        cache.is_cached(a),
        cache.is_cached(b)
    );

    let pa = cache.fetch(a)?;
    let pc = cache.fetch(c)?;
    let pb = cache.fetch(b)?;
    println!(
        "all frames pinned, B served from overflow: {}",
        pb.is_overflow()
    );
    for p in [pa, pb, pc] {
        cache.unpin(p.key(), false)?;
    }
    println!("{:?}", cache.stats());
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
