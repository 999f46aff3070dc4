// Fixed-size block allocation with a free list threaded through the free
// blocks themselves.

use hardpage::pool::BlockPool;
use hardpage::Error;

pub fn run_example() -> hardpage::Result<()> {
    let pool = BlockPool::new(4, 4096)?;
    let a = pool.alloc()?;
    let b = pool.alloc()?;
    pool.write(a)[..5].copy_from_slice(b"hello");
    println!(
        "allocated blocks {} and {}: {:?}",
        a.index(),
        b.index(),
        pool.stats()
    );

    pool.release(a)?;
    let again = pool.alloc()?;
    assert_eq!(again.index(), a.index());
    println!("released {} and got it straight back (LIFO)", a.index());

    let _c = pool.alloc()?;
    let _d = pool.alloc()?;
    assert!(matches!(pool.alloc(), Err(Error::PoolExhausted)));
    println!("pool full: {:?}", pool.stats());

    pool.release(b)?;
    assert!(matches!(pool.release(b), Err(Error::DoubleFree(_))));
    println!("second release of block {} rejected", b.index());
    println!("free list now {:?}", pool.free_list_indices());
    Ok(())
}

fn main() -> hardpage::Result<()> {
    run_example()
}
