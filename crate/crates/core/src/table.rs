//! Table layer: the database handle, row placement and retrieval.
//!
//! Rows live in fixed-size slots addressed by [`RowId`] (page, slot), so a
//! lookup resolves its page by arithmetic and touches exactly one page.
//! Each table keeps a last-insert hint: every slot before it is occupied, so
//! inserts scan forward from the hint instead of from the start, and deletes
//! pull the hint back to the freed slot when it is earlier.
//!
//! Mutations of a table are serialized through a per-table `RwLock`; reads
//! of the same table share it and different tables never contend.

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use crate::cache::{
    CacheKey, CacheStats, PageCache, PinnedPage, DEFAULT_CAPACITY, DEFAULT_OVERFLOW,
};
use crate::catalog::{self, TableMeta, MAX_TABLES};
use crate::error::{Error, Result};
use crate::page::{
    self, slot_range, slots_touching_words, PageHeader, PageId, PageStore, PAGE_SIZE, SLOT_FREE,
    SLOT_OCCUPIED,
};
use crate::schema::{ColumnDef, FieldMatch, Predicate, TableSchema, Value};

pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RowId {
    pub page_index: u32,
    pub slot: u16,
}

impl RowId {
    pub fn new(page_index: u32, slot: u16) -> Self {
        RowId { page_index, slot }
    }

    /// Splits a table-wide row ordinal into (page, slot).
    pub fn from_ordinal(ordinal: u64, slots_per_page: usize) -> Option<RowId> {
        let per = slots_per_page as u64;
        let page_index = u32::try_from(ordinal / per).ok()?;
        Some(RowId::new(page_index, (ordinal % per) as u16))
    }

    pub fn ordinal(self, slots_per_page: usize) -> u64 {
        u64::from(self.page_index) * slots_per_page as u64 + u64::from(self.slot)
    }

    fn successor(self, slots_per_page: usize) -> RowId {
        if self.slot as usize + 1 < slots_per_page {
            RowId::new(self.page_index, self.slot + 1)
        } else {
            RowId::new(self.page_index + 1, 0)
        }
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.page_index, self.slot)
    }
}

pub type Row = Vec<Value>;

#[derive(Debug, Clone, Copy)]
pub struct DbConfig {
    pub cache_capacity: usize,
    pub overflow_capacity: usize,
    /// fsync page files before the rename that publishes them.
    pub sync_writes: bool,
}

impl Default for DbConfig {
    fn default() -> Self {
        DbConfig {
            cache_capacity: DEFAULT_CAPACITY,
            overflow_capacity: DEFAULT_OVERFLOW,
            sync_writes: true,
        }
    }
}

#[derive(Debug)]
struct TableState {
    page_count: u32,
    record_count: u64,
    hint: RowId,
    dropped: bool,
}

#[derive(Debug)]
struct Table {
    id: u32,
    schema: TableSchema,
    state: RwLock<TableState>,
}

impl Table {
    fn meta(&self, st: &TableState) -> TableMeta {
        TableMeta {
            table_id: self.id,
            schema: self.schema.clone(),
            page_count: st.page_count,
            record_count: st.record_count,
            last_insert_hint: st.hint,
        }
    }

    fn slots(&self) -> usize {
        self.schema.slots_per_page()
    }
}

/// Outcome of a full consistency pass over one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableAudit {
    /// Every slot before the last-insert hint is occupied.
    pub hint_sound: bool,
    /// Sum of per-page header record counts.
    pub header_records: u64,
    /// Occupied slots found by scanning.
    pub occupied_slots: u64,
    pub meta_records: u64,
}

impl TableAudit {
    pub fn is_consistent(&self) -> bool {
        self.hint_sound
            && self.header_records == self.meta_records
            && self.occupied_slots == self.meta_records
    }
}

/// Rows from a scan that tolerates damaged slots.
#[derive(Debug, Default)]
pub struct Salvage {
    pub rows: Vec<(RowId, Row)>,
    pub unreadable: Vec<RowId>,
}

/// Unpins on drop; `dirty` is reported to the cache.
struct Pin<'a> {
    cache: &'a PageCache,
    page: PinnedPage,
    dirty: bool,
}

impl Drop for Pin<'_> {
    fn drop(&mut self) {
        // Overflow write-back failures resurface at the next flush.
        let _ = self.cache.unpin(self.page.key(), self.dirty);
    }
}

pub struct Database {
    root: PathBuf,
    cache: PageCache,
    tables: RwLock<Vec<Option<Arc<Table>>>>,
    catalog_write: Mutex<()>,
    page_fetches: AtomicU64,
    _lock: File,
}

impl fmt::Debug for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Database")
            .field("root", &self.root)
            .finish_non_exhaustive()
    }
}

/// Takes the advisory lock on `root/.lock`, creating the root if needed.
pub fn lock_root(root: &Path) -> Result<File> {
    fs::create_dir_all(root).map_err(|e| Error::storage(root, e))?;
    let path = root.join(LOCK_FILE);
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Error::storage(&path, e))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(fs::TryLockError::WouldBlock) => Err(Error::DatabaseLocked { path }),
        Err(fs::TryLockError::Error(e)) => Err(Error::storage(&path, e)),
    }
}

impl Database {
    pub fn open(root: impl AsRef<Path>, config: DbConfig) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let lock = lock_root(&root)?;
        let store = PageStore::new(&root, config.sync_writes);
        let cache = PageCache::new(store, config.cache_capacity, config.overflow_capacity)?;
        let db = Database {
            root,
            cache,
            tables: RwLock::new(vec![None; MAX_TABLES]),
            catalog_write: Mutex::new(()),
            page_fetches: AtomicU64::new(0),
            _lock: lock,
        };
        db.load_catalog()?;
        Ok(db)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cache(&self) -> &PageCache {
        &self.cache
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    /// Table-page fetches issued by row operations since open.
    pub fn page_fetches(&self) -> u64 {
        self.page_fetches.load(Ordering::Relaxed)
    }

    fn load_catalog(&self) -> Result<()> {
        let store = self.cache.store();
        if !store.path_of(PageId::CATALOG).exists() {
            let page = self.cache.fetch_new(CacheKey::Catalog, |buf| {
                catalog::write_catalog(buf, &[]);
            })?;
            self.cache.unpin(page.key(), true)?;
            self.cache.flush_all()?;
            return Ok(());
        }
        let page = self.cache.fetch(CacheKey::Catalog)?;
        let descriptors = {
            let pin = Pin {
                cache: &self.cache,
                page,
                dirty: false,
            };
            let bytes = self.cache.read(&pin.page);
            catalog::read_catalog(&bytes)?
        };
        let mut tables = self.tables.write().unwrap();
        for (id, d) in descriptors.into_iter().enumerate() {
            let Some(d) = d else { continue };
            let read = store.read_page(PageId::schema(id as u32))?;
            let schema = catalog::read_schema_page(read.image.as_bytes(), &d)?;
            tables[id] = Some(Arc::new(Table {
                id: id as u32,
                schema,
                state: RwLock::new(TableState {
                    page_count: d.page_count,
                    record_count: d.record_count,
                    hint: d.last_insert_hint,
                    dropped: false,
                }),
            }));
        }
        Ok(())
    }

    /// Rewrites the cached catalog page from the in-memory table metadata.
    fn sync_catalog(&self) -> Result<()> {
        let _guard = self.catalog_write.lock().unwrap();
        let metas: Vec<Option<TableMeta>> = {
            let tables = self.tables.read().unwrap();
            tables
                .iter()
                .map(|t| {
                    t.as_ref().and_then(|t| {
                        let st = t.state.read().unwrap();
                        (!st.dropped).then(|| t.meta(&st))
                    })
                })
                .collect()
        };
        let page = self.cache.fetch(CacheKey::Catalog)?;
        let mut pin = Pin {
            cache: &self.cache,
            page,
            dirty: false,
        };
        let mut image = vec![0u8; PAGE_SIZE];
        catalog::write_catalog(&mut image, &metas);
        let mut bytes = self.cache.write(&pin.page);
        if bytes[..] != image[..] {
            bytes.copy_from_slice(&image);
            pin.dirty = true;
        }
        Ok(())
    }

    /// Persists metadata and every dirty page.
    pub fn flush(&self) -> Result<usize> {
        self.sync_catalog()?;
        self.cache.flush_all()
    }

    /// Flushes, then empties the page cache so later reads go to disk.
    pub fn drop_cache(&self) -> Result<()> {
        self.sync_catalog()?;
        self.cache.clear()
    }

    pub fn close(self) -> Result<()> {
        self.flush().map(|_| ())
    }

    fn table(&self, name: &str) -> Result<Arc<Table>> {
        self.tables
            .read()
            .unwrap()
            .iter()
            .flatten()
            .find(|t| t.schema.name() == name)
            .cloned()
            .ok_or_else(|| Error::TableNotFound(name.to_owned()))
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables
            .read()
            .unwrap()
            .iter()
            .flatten()
            .map(|t| t.schema.name().to_owned())
            .collect()
    }

    pub fn table_meta(&self, name: &str) -> Result<TableMeta> {
        let table = self.table(name)?;
        let st = table.state.read().unwrap();
        live(&table, &st)?;
        Ok(table.meta(&st))
    }

    pub fn create_table(&self, name: &str, columns: Vec<ColumnDef>) -> Result<TableMeta> {
        let schema = TableSchema::new(name, columns)?;
        let meta = {
            let mut tables = self.tables.write().unwrap();
            if tables.iter().flatten().any(|t| t.schema.name() == name) {
                return Err(Error::TableExists(name.to_owned()));
            }
            let id = tables
                .iter()
                .position(Option::is_none)
                .ok_or(Error::CatalogFull { max: MAX_TABLES })?;
            let mut image = vec![0u8; PAGE_SIZE];
            catalog::write_schema_page(&mut image, id as u32, &schema);
            self.cache
                .store()
                .write_bytes(PageId::schema(id as u32), &image, &[])?;
            let table = Arc::new(Table {
                id: id as u32,
                schema,
                state: RwLock::new(TableState {
                    page_count: 0,
                    record_count: 0,
                    hint: RowId::default(),
                    dropped: false,
                }),
            });
            let meta = table.meta(&table.state.read().unwrap());
            tables[id] = Some(table);
            meta
        };
        self.flush()?;
        Ok(meta)
    }

    pub fn drop_table(&self, name: &str) -> Result<()> {
        {
            let mut tables = self.tables.write().unwrap();
            let id = tables
                .iter()
                .position(|t| t.as_ref().is_some_and(|t| t.schema.name() == name))
                .ok_or_else(|| Error::TableNotFound(name.to_owned()))?;
            let table = tables[id].take().expect("position found it");
            table.state.write().unwrap().dropped = true;
            self.cache.discard_table(table.id)?;
            let dir = page::table_dir(&self.root, table.id);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::storage(&dir, e))?;
            }
        }
        self.flush()?;
        Ok(())
    }

    fn pin(&self, table_id: u32, page_index: u32) -> Result<Pin<'_>> {
        self.page_fetches.fetch_add(1, Ordering::Relaxed);
        let page = self
            .cache
            .fetch(CacheKey::table_page(table_id, page_index))?;
        Ok(Pin {
            cache: &self.cache,
            page,
            dirty: false,
        })
    }

    pub fn insert_row(&self, name: &str, values: &[Value]) -> Result<RowId> {
        let table = self.table(name)?;
        let schema = &table.schema;
        let mut row = vec![0u8; schema.slot_size()];
        schema.encode_row(values, &mut row)?;
        let slots = table.slots();

        let mut st = table.state.write().unwrap();
        live(&table, &st)?;
        let mut cursor = st.hint;
        let rid = loop {
            if cursor.page_index >= st.page_count {
                let page_index = st.page_count;
                let pid = PageId::new(table.id, page_index);
                let header = PageHeader::new(pid, schema.slot_size() as u16);
                let page = self
                    .cache
                    .fetch_new(CacheKey::table_page(table.id, page_index), |buf| {
                        header.write_to(buf)
                    })?;
                self.page_fetches.fetch_add(1, Ordering::Relaxed);
                let mut pin = Pin {
                    cache: &self.cache,
                    page,
                    dirty: true,
                };
                st.page_count += 1;
                place(&self.cache, &mut pin, schema.slot_size(), 0, &row);
                break RowId::new(page_index, 0);
            }
            let mut pin = self.pin(table.id, cursor.page_index)?;
            let free = {
                let bytes = self.cache.read(&pin.page);
                let damaged = slots_touching_words(schema.slot_size(), pin.page.damaged_words());
                (cursor.slot as usize..slots).find(|&s| {
                    bytes[slot_range(schema.slot_size(), s)][0] == SLOT_FREE
                        && damaged.binary_search(&s).is_err()
                })
            };
            if let Some(s) = free {
                place(&self.cache, &mut pin, schema.slot_size(), s, &row);
                break RowId::new(cursor.page_index, s as u16);
            }
            cursor = RowId::new(cursor.page_index + 1, 0);
        };
        st.hint = rid.successor(slots);
        st.record_count += 1;
        Ok(rid)
    }

    pub fn get_row(&self, name: &str, rid: RowId) -> Result<Row> {
        let table = self.table(name)?;
        let st = table.state.read().unwrap();
        live(&table, &st)?;
        if rid.page_index >= st.page_count || rid.slot as usize >= table.slots() {
            return Err(Error::RowNotFound(rid));
        }
        let pin = self.pin(table.id, rid.page_index)?;
        let bytes = self.cache.read(&pin.page);
        read_slot(&table.schema, &pin.page, &bytes, rid)?.ok_or(Error::RowNotFound(rid))
    }

    pub fn delete_row(&self, name: &str, rid: RowId) -> Result<()> {
        let table = self.table(name)?;
        let mut st = table.state.write().unwrap();
        live(&table, &st)?;
        if rid.page_index >= st.page_count || rid.slot as usize >= table.slots() {
            return Err(Error::RowNotFound(rid));
        }
        let mut pin = self.pin(table.id, rid.page_index)?;
        {
            let bytes = self.cache.read(&pin.page);
            if read_slot(&table.schema, &pin.page, &bytes, rid)?.is_none() {
                return Err(Error::RowNotFound(rid));
            }
        }
        clear(
            &self.cache,
            &mut pin,
            table.schema.slot_size(),
            rid.slot as usize,
        );
        st.record_count -= 1;
        st.hint = st.hint.min(rid);
        Ok(())
    }

    /// Deletes every row matching `predicate` (all rows when `None`) and
    /// returns how many were removed. Runs under the table's write lock.
    pub fn delete_where(&self, name: &str, predicate: Option<&Predicate>) -> Result<u64> {
        let table = self.table(name)?;
        let filter = compile(&table.schema, predicate)?;
        let mut st = table.state.write().unwrap();
        live(&table, &st)?;
        let size = table.schema.slot_size();
        let mut deleted = 0;
        for page_index in 0..st.page_count {
            let mut pin = self.pin(table.id, page_index)?;
            let doomed: Vec<usize> = {
                let bytes = self.cache.read(&pin.page);
                let mut doomed = Vec::new();
                for s in 0..table.slots() {
                    let rid = RowId::new(page_index, s as u16);
                    let slot = &bytes[slot_range(size, s)];
                    // Unreadable slots are left alone so their damage stays visible.
                    if let Ok(Some(_)) = read_slot(&table.schema, &pin.page, &bytes, rid) {
                        if filter.as_ref().is_none_or(|f| f.matches(slot)) {
                            doomed.push(s);
                        }
                    }
                }
                doomed
            };
            for &s in &doomed {
                clear(&self.cache, &mut pin, size, s);
            }
            if let Some(&first) = doomed.first() {
                st.hint = st.hint.min(RowId::new(page_index, first as u16));
            }
            deleted += doomed.len() as u64;
            st.record_count -= doomed.len() as u64;
        }
        Ok(deleted)
    }

    /// Rows matching `predicate` in (page, slot) order. Fails with
    /// `RowCorrupt` on the first unreadable occupied slot.
    pub fn scan(&self, name: &str, predicate: Option<&Predicate>) -> Result<Vec<(RowId, Row)>> {
        let mut rows = Vec::new();
        self.visit(name, predicate, &mut |rid, row| match row {
            Some(row) => {
                rows.push((rid, row));
                Ok(())
            }
            None => Err(Error::RowCorrupt(rid)),
        })?;
        Ok(rows)
    }

    /// Like [`Database::scan`] but collects unreadable slots instead of failing.
    pub fn scan_salvage(&self, name: &str, predicate: Option<&Predicate>) -> Result<Salvage> {
        let mut out = Salvage::default();
        self.visit(name, predicate, &mut |rid, row| {
            match row {
                Some(row) => out.rows.push((rid, row)),
                None => out.unreadable.push(rid),
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn visit(
        &self,
        name: &str,
        predicate: Option<&Predicate>,
        f: &mut dyn FnMut(RowId, Option<Row>) -> Result<()>,
    ) -> Result<()> {
        let table = self.table(name)?;
        let filter = compile(&table.schema, predicate)?;
        let st = table.state.read().unwrap();
        live(&table, &st)?;
        let size = table.schema.slot_size();
        for page_index in 0..st.page_count {
            let pin = self.pin(table.id, page_index)?;
            let bytes = self.cache.read(&pin.page);
            for s in 0..table.slots() {
                let rid = RowId::new(page_index, s as u16);
                let slot = &bytes[slot_range(size, s)];
                match read_slot(&table.schema, &pin.page, &bytes, rid) {
                    Ok(Some(row)) => {
                        if filter.as_ref().is_none_or(|m| m.matches(slot)) {
                            f(rid, Some(row))?;
                        }
                    }
                    Ok(None) => {}
                    Err(Error::RowCorrupt(_)) => f(rid, None)?,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(())
    }

    /// Full consistency pass: hint soundness and record-count agreement.
    pub fn audit_table(&self, name: &str) -> Result<TableAudit> {
        let table = self.table(name)?;
        let st = table.state.read().unwrap();
        live(&table, &st)?;
        let size = table.schema.slot_size();
        let mut audit = TableAudit {
            hint_sound: true,
            header_records: 0,
            occupied_slots: 0,
            meta_records: st.record_count,
        };
        for page_index in 0..st.page_count {
            let pin = self.pin(table.id, page_index)?;
            let bytes = self.cache.read(&pin.page);
            audit.header_records += u64::from(PageHeader::read_from(&bytes).record_count);
            for s in 0..table.slots() {
                let rid = RowId::new(page_index, s as u16);
                let occupied = bytes[slot_range(size, s)][0] != SLOT_FREE;
                audit.occupied_slots += u64::from(occupied);
                if rid < st.hint && !occupied {
                    audit.hint_sound = false;
                }
            }
        }
        Ok(audit)
    }
}

impl Drop for Database {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

fn live(table: &Table, st: &TableState) -> Result<()> {
    if st.dropped {
        return Err(Error::TableNotFound(table.schema.name().to_owned()));
    }
    Ok(())
}

fn compile(schema: &TableSchema, predicate: Option<&Predicate>) -> Result<Option<FieldMatch>> {
    predicate.map(|p| schema.compile_predicate(p)).transpose()
}

/// `Ok(None)` for a free slot, `RowCorrupt` for damaged or undecodable slots.
fn read_slot(
    schema: &TableSchema,
    page: &PinnedPage,
    bytes: &[u8],
    rid: RowId,
) -> Result<Option<Row>> {
    let size = schema.slot_size();
    let slot = rid.slot as usize;
    if !page.damaged_words().is_empty()
        && slots_touching_words(size, page.damaged_words()).contains(&slot)
    {
        return Err(Error::RowCorrupt(rid));
    }
    let bytes = &bytes[slot_range(size, slot)];
    match bytes[0] {
        SLOT_FREE => Ok(None),
        SLOT_OCCUPIED => schema
            .decode_row(bytes)
            .map(Some)
            .ok_or(Error::RowCorrupt(rid)),
        _ => Err(Error::RowCorrupt(rid)),
    }
}

fn place(cache: &PageCache, pin: &mut Pin<'_>, slot_size: usize, slot: usize, row: &[u8]) {
    let mut bytes = cache.write(&pin.page);
    bytes[slot_range(slot_size, slot)].copy_from_slice(row);
    let count = PageHeader::read_from(&bytes).record_count;
    PageHeader::set_record_count(&mut bytes, count + 1);
    pin.dirty = true;
}

fn clear(cache: &PageCache, pin: &mut Pin<'_>, slot_size: usize, slot: usize) {
    let mut bytes = cache.write(&pin.page);
    bytes[slot_range(slot_size, slot)].fill(0);
    let count = PageHeader::read_from(&bytes).record_count;
    PageHeader::set_record_count(&mut bytes, count - 1);
    pin.dirty = true;
}
