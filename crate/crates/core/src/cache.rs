//! Global page cache.
//!
//! Decoded page images live in frames drawn from a [`BlockPool`]. Entries are
//! pinned while in use and replaced with the clock (second chance) policy:
//! the hand sweeps the frame ring, clearing reference bits, and takes the
//! first unpinned entry whose bit is already clear. Dirty victims are written
//! back first. When every frame is pinned, the page is served from a small
//! overflow pool instead and released as soon as its last pin goes away.
//!
//! Disk I/O never happens under the structure-wide mutex. An entry that is
//! being loaded or evicted is marked as such and other threads asking for the
//! same key wait on a condition variable.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex, MutexGuard, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{Error, Result};
use crate::page::{DamagedWord, PageId, PageStore, PAGE_SIZE};
use crate::pool::{BlockHandle, BlockPool};

pub const DEFAULT_CAPACITY: usize = 64;
pub const DEFAULT_OVERFLOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CacheKey {
    Catalog,
    TablePage { table_id: u32, page_index: u32 },
}

impl CacheKey {
    pub fn table_page(table_id: u32, page_index: u32) -> Self {
        CacheKey::TablePage {
            table_id,
            page_index,
        }
    }

    pub fn page_id(self) -> PageId {
        match self {
            CacheKey::Catalog => PageId::CATALOG,
            CacheKey::TablePage {
                table_id,
                page_index,
            } => PageId::new(table_id, page_index),
        }
    }

    fn table_id(self) -> Option<u32> {
        match self {
            CacheKey::Catalog => None,
            CacheKey::TablePage { table_id, .. } => Some(table_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Location {
    Frame(BlockHandle),
    Overflow(BlockHandle),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Loading,
    Ready,
    /// Being written back before removal. Not pinnable.
    Evicting,
}

#[derive(Debug)]
struct Entry {
    key: CacheKey,
    pin_count: u32,
    reference: bool,
    dirty: bool,
    state: State,
    /// A flush is writing this entry; it must not be chosen as a victim.
    flushing: bool,
    damage: Vec<DamagedWord>,
}

/// A pinned page. The holder must hand it back with [`PageCache::unpin`].
#[derive(Debug, Clone)]
pub struct PinnedPage {
    key: CacheKey,
    location: Location,
    damaged_words: Vec<usize>,
}

impl PinnedPage {
    pub fn key(&self) -> CacheKey {
        self.key
    }

    /// Indices of 8-byte words that failed ECC decoding when the page was read.
    pub fn damaged_words(&self) -> &[usize] {
        &self.damaged_words
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self.location, Location::Overflow(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub capacity: usize,
    pub resident: usize,
    pub pinned: usize,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub overflow_peak: usize,
}

#[derive(Debug, Default)]
struct Inner {
    map: HashMap<CacheKey, Location>,
    frames: Vec<Option<Entry>>,
    overflow: Vec<Option<Entry>>,
    hand: usize,
    overflow_live: usize,
    hits: u64,
    misses: u64,
    evictions: u64,
    overflow_peak: usize,
}

impl Inner {
    fn entry(&self, loc: Location) -> &Entry {
        let slot = match loc {
            Location::Frame(h) => &self.frames[h.index() as usize],
            Location::Overflow(h) => &self.overflow[h.index() as usize],
        };
        slot.as_ref().expect("mapped location holds an entry")
    }

    fn entry_mut(&mut self, loc: Location) -> &mut Entry {
        let slot = match loc {
            Location::Frame(h) => &mut self.frames[h.index() as usize],
            Location::Overflow(h) => &mut self.overflow[h.index() as usize],
        };
        slot.as_mut().expect("mapped location holds an entry")
    }

    fn put(&mut self, loc: Location, entry: Entry) {
        match loc {
            Location::Frame(h) => self.frames[h.index() as usize] = Some(entry),
            Location::Overflow(h) => self.overflow[h.index() as usize] = Some(entry),
        }
    }

    fn take(&mut self, loc: Location) -> Entry {
        let slot = match loc {
            Location::Frame(h) => &mut self.frames[h.index() as usize],
            Location::Overflow(h) => &mut self.overflow[h.index() as usize],
        };
        slot.take().expect("mapped location holds an entry")
    }

    /// Advances the clock hand until an unpinned entry with a clear
    /// reference bit is found. Two full sweeps suffice.
    fn clock_victim(&mut self) -> Option<usize> {
        let n = self.frames.len();
        for _ in 0..=2 * n {
            let i = self.hand;
            self.hand = (self.hand + 1) % n;
            if let Some(e) = self.frames[i].as_mut() {
                if e.state != State::Ready || e.pin_count > 0 || e.flushing {
                    continue;
                }
                if e.reference {
                    e.reference = false;
                } else {
                    return Some(i);
                }
            }
        }
        None
    }
}

enum Fill<'a> {
    Disk,
    Init(&'a mut dyn FnMut(&mut [u8])),
}

#[derive(Debug)]
pub struct PageCache {
    store: PageStore,
    frames: BlockPool,
    overflow: BlockPool,
    inner: Mutex<Inner>,
    changed: Condvar,
}

impl PageCache {
    pub fn new(store: PageStore, capacity: usize, overflow_capacity: usize) -> Result<Self> {
        let frames = BlockPool::new(capacity, PAGE_SIZE)?;
        let overflow = BlockPool::new(overflow_capacity, PAGE_SIZE)?;
        let inner = Inner {
            frames: (0..capacity).map(|_| None).collect(),
            overflow: (0..overflow_capacity).map(|_| None).collect(),
            ..Inner::default()
        };
        Ok(PageCache {
            store,
            frames,
            overflow,
            inner: Mutex::new(inner),
            changed: Condvar::new(),
        })
    }

    pub fn store(&self) -> &PageStore {
        &self.store
    }

    pub fn capacity(&self) -> usize {
        self.frames.block_count()
    }

    /// Pins the page for `key`, loading it from disk on a miss.
    pub fn fetch(&self, key: CacheKey) -> Result<PinnedPage> {
        self.acquire(key, Fill::Disk)
    }

    /// Pins a page that does not exist on disk yet. `init` fills the frame and
    /// the entry starts out dirty. If the key is already cached the existing
    /// entry is pinned and `init` is not called.
    pub fn fetch_new(&self, key: CacheKey, mut init: impl FnMut(&mut [u8])) -> Result<PinnedPage> {
        self.acquire(key, Fill::Init(&mut init))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap()
    }

    fn pinned(key: CacheKey, loc: Location, entry: &Entry) -> PinnedPage {
        PinnedPage {
            key,
            location: loc,
            damaged_words: entry.damage.iter().map(|d| d.index as usize).collect(),
        }
    }

    fn acquire(&self, key: CacheKey, mut fill: Fill<'_>) -> Result<PinnedPage> {
        let mut inner = self.lock();
        let loc = loop {
            if let Some(&loc) = inner.map.get(&key) {
                let entry = inner.entry_mut(loc);
                if entry.state == State::Ready {
                    entry.pin_count += 1;
                    entry.reference = true;
                    let pinned = Self::pinned(key, loc, entry);
                    inner.hits += 1;
                    return Ok(pinned);
                }
                inner = self.changed.wait(inner).unwrap();
                continue;
            }
            if let Ok(handle) = self.frames.alloc() {
                break Location::Frame(handle);
            }
            if let Some(victim) = inner.clock_victim() {
                let handle = frame_handle(&self.frames, victim);
                let vloc = Location::Frame(handle);
                if inner.entry(vloc).dirty {
                    inner = self.write_back_for_removal(inner, vloc)?;
                }
                let old = inner.take(vloc);
                inner.map.remove(&old.key);
                inner.evictions += 1;
                self.changed.notify_all();
                if inner.map.contains_key(&key) {
                    // Another thread loaded the key while we were writing.
                    self.frames.release(handle)?;
                    continue;
                }
                break vloc;
            }
            match self.overflow.alloc() {
                Ok(handle) => {
                    inner.overflow_live += 1;
                    inner.overflow_peak = inner.overflow_peak.max(inner.overflow_live);
                    break Location::Overflow(handle);
                }
                Err(Error::PoolExhausted) => return Err(Error::CacheSaturated),
                Err(e) => return Err(e),
            }
        };

        inner.misses += 1;
        let is_new = matches!(fill, Fill::Init(_));
        inner.put(
            loc,
            Entry {
                key,
                pin_count: 1,
                reference: true,
                dirty: is_new,
                state: State::Loading,
                flushing: false,
                damage: Vec::new(),
            },
        );
        inner.map.insert(key, loc);
        drop(inner);

        let loaded = {
            let mut frame = self.block_write(loc);
            match &mut fill {
                Fill::Disk => self
                    .store
                    .read_into(key.page_id(), &mut frame)
                    .map(|(_, damage)| damage),
                Fill::Init(init) => {
                    frame.fill(0);
                    init(&mut frame);
                    Ok(Vec::new())
                }
            }
        };

        let mut inner = self.lock();
        let result = match loaded {
            Ok(damage) => {
                let entry = inner.entry_mut(loc);
                entry.state = State::Ready;
                entry.damage = damage;
                Ok(Self::pinned(key, loc, entry))
            }
            Err(e) => {
                inner.take(loc);
                inner.map.remove(&key);
                self.release_block(&mut inner, loc)?;
                Err(e)
            }
        };
        self.changed.notify_all();
        result
    }

    /// Writes back an entry that is about to be removed. Returns with the
    /// lock held again; on failure the entry stays resident and dirty.
    fn write_back_for_removal<'a>(
        &'a self,
        mut inner: MutexGuard<'a, Inner>,
        loc: Location,
    ) -> Result<MutexGuard<'a, Inner>> {
        let entry = inner.entry_mut(loc);
        entry.state = State::Evicting;
        entry.dirty = false;
        let pid = entry.key.page_id();
        let damage = entry.damage.clone();
        drop(inner);
        let written = self.store.write_bytes(pid, &self.block_read(loc), &damage);
        let mut inner = self.lock();
        if let Err(e) = written {
            let entry = inner.entry_mut(loc);
            entry.state = State::Ready;
            entry.dirty = true;
            self.changed.notify_all();
            return Err(e);
        }
        Ok(inner)
    }

    fn release_block(&self, inner: &mut Inner, loc: Location) -> Result<()> {
        match loc {
            Location::Frame(h) => self.frames.release(h),
            Location::Overflow(h) => {
                inner.overflow_live -= 1;
                self.overflow.release(h)
            }
        }
    }

    pub fn unpin(&self, key: CacheKey, dirty: bool) -> Result<()> {
        let mut inner = self.lock();
        let loc = *inner.map.get(&key).ok_or(Error::PinUnderflow)?;
        let entry = inner.entry_mut(loc);
        if entry.pin_count == 0 || entry.state != State::Ready {
            return Err(Error::PinUnderflow);
        }
        entry.pin_count -= 1;
        entry.dirty |= dirty;
        if matches!(loc, Location::Overflow(_)) {
            self.settle_overflow(inner, loc)?;
        }
        Ok(())
    }

    /// Destroys an overflow entry once it is neither pinned nor being flushed,
    /// writing it back first if dirty.
    fn settle_overflow<'a>(
        &'a self,
        mut inner: MutexGuard<'a, Inner>,
        loc: Location,
    ) -> Result<()> {
        let entry = inner.entry(loc);
        if entry.pin_count > 0 || entry.flushing || entry.state != State::Ready {
            return Ok(());
        }
        if entry.dirty {
            inner = self.write_back_for_removal(inner, loc)?;
        }
        let old = inner.take(loc);
        inner.map.remove(&old.key);
        self.release_block(&mut inner, loc)?;
        self.changed.notify_all();
        Ok(())
    }

    /// Writes every dirty entry back to disk. Entries stay cached.
    pub fn flush_all(&self) -> Result<usize> {
        let mut written = 0;
        let mut inner = self.lock();
        let mut locations: Vec<Location> = inner.map.values().copied().collect();
        locations.sort_by_key(|loc| match loc {
            Location::Frame(h) => (0, h.index()),
            Location::Overflow(h) => (1, h.index()),
        });
        for loc in locations {
            // The entry may have moved or gone while the lock was released.
            let Some(entry) = slot_entry(&inner, loc) else {
                continue;
            };
            if !entry.dirty || entry.flushing || entry.state != State::Ready {
                continue;
            }
            let entry = inner.entry_mut(loc);
            entry.flushing = true;
            entry.dirty = false;
            let key = entry.key;
            let damage = entry.damage.clone();
            drop(inner);
            let result = self
                .store
                .write_bytes(key.page_id(), &self.block_read(loc), &damage);
            inner = self.lock();
            let entry = inner.entry_mut(loc);
            entry.flushing = false;
            self.changed.notify_all();
            if let Err(e) = result {
                entry.dirty = true;
                return Err(e);
            }
            written += 1;
            if matches!(loc, Location::Overflow(_)) && inner.entry(loc).pin_count == 0 {
                self.settle_overflow(inner, loc)?;
                inner = self.lock();
            }
        }
        Ok(written)
    }

    /// Flushes, then drops every unpinned entry so the next access of any
    /// page goes to disk.
    pub fn clear(&self) -> Result<()> {
        self.flush_all()?;
        let mut inner = self.lock();
        self.remove_where(&mut inner, |_| true)
    }

    /// Drops every cached page of a table without writing it back. The caller
    /// guarantees no pins are held on the table's pages.
    pub fn discard_table(&self, table_id: u32) -> Result<()> {
        let mut inner = self.lock();
        loop {
            let busy = inner.map.iter().any(|(k, &loc)| {
                k.table_id() == Some(table_id) && {
                    let e = inner.entry(loc);
                    e.state != State::Ready || e.flushing
                }
            });
            if !busy {
                break;
            }
            inner = self.changed.wait(inner).unwrap();
        }
        self.remove_where(&mut inner, |k| k.table_id() == Some(table_id))
    }

    fn remove_where(&self, inner: &mut Inner, pred: impl Fn(CacheKey) -> bool) -> Result<()> {
        let doomed: Vec<(CacheKey, Location)> = inner
            .map
            .iter()
            .filter(|(k, &loc)| {
                let e = inner.entry(loc);
                pred(**k) && e.pin_count == 0 && e.state == State::Ready && !e.flushing
            })
            .map(|(k, loc)| (*k, *loc))
            .collect();
        for (key, loc) in doomed {
            inner.take(loc);
            inner.map.remove(&key);
            self.release_block(inner, loc)?;
        }
        self.changed.notify_all();
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.lock();
        CacheStats {
            capacity: self.frames.block_count(),
            resident: inner.frames.iter().flatten().count(),
            pinned: inner
                .frames
                .iter()
                .chain(inner.overflow.iter())
                .flatten()
                .filter(|e| e.pin_count > 0)
                .count(),
            hits: inner.hits,
            misses: inner.misses,
            evictions: inner.evictions,
            overflow_peak: inner.overflow_peak,
        }
    }

    /// Number of overflow buffers currently in use.
    pub fn overflow_in_use(&self) -> usize {
        self.lock().overflow_live
    }

    /// Pin count of a cached key, if resident.
    pub fn pin_count(&self, key: CacheKey) -> Option<u32> {
        let inner = self.lock();
        inner.map.get(&key).map(|&loc| inner.entry(loc).pin_count)
    }

    pub fn is_cached(&self, key: CacheKey) -> bool {
        self.lock().map.contains_key(&key)
    }

    pub fn read(&self, page: &PinnedPage) -> RwLockReadGuard<'_, Box<[u8]>> {
        self.block_read(page.location)
    }

    /// Exclusive access to a pinned page's bytes. Pass `dirty = true` to
    /// [`PageCache::unpin`] after modifying them.
    pub fn write(&self, page: &PinnedPage) -> RwLockWriteGuard<'_, Box<[u8]>> {
        self.block_write(page.location)
    }

    fn block_read(&self, loc: Location) -> RwLockReadGuard<'_, Box<[u8]>> {
        match loc {
            Location::Frame(h) => self.frames.read(h),
            Location::Overflow(h) => self.overflow.read(h),
        }
    }

    fn block_write(&self, loc: Location) -> RwLockWriteGuard<'_, Box<[u8]>> {
        match loc {
            Location::Frame(h) => self.frames.write(h),
            Location::Overflow(h) => self.overflow.write(h),
        }
    }
}

fn slot_entry(inner: &Inner, loc: Location) -> Option<&Entry> {
    match loc {
        Location::Frame(h) => inner.frames[h.index() as usize].as_ref(),
        Location::Overflow(h) => inner.overflow[h.index() as usize].as_ref(),
    }
}

/// Frame `index` is occupied, so its handle is live in the frame pool.
fn frame_handle(frames: &BlockPool, index: usize) -> BlockHandle {
    debug_assert!(index < frames.block_count());
    BlockHandle::from_index(index as u32)
}
