//! Page files: 4096-byte page images stored one per file, each file holding
//! the ECC encoding of its image (4608 bytes).
//!
//! Table pages live at `t<table>/d<index / 256>/p<index % 256>.pg` under the
//! storage root. Two bookkeeping pages share the format: the catalog at
//! `catalog.pg` and each table's column list at `t<table>/schema.pg`.
//!
//! Page image layout:
//!
//! ```text
//!   0..4    magic "HPG1"
//!   4..6    format version (1), little-endian
//!   6..10   table id
//!   10..14  page index
//!   14..16  slot size
//!   16..18  slot count (= 4032 / slot size)
//!   18..20  record count
//!   20..64  zero
//!   64..    slot area, slot i at 64 + i * slot_size
//! ```
//!
//! Writes go to `<file>.tmp` first and are renamed over the target.

use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::ecc::{self, BlockReport, ENCODED_BLOCK_SIZE};
use crate::error::{Error, Result};

pub const PAGE_SIZE: usize = ecc::BLOCK_SIZE;
pub const HEADER_SIZE: usize = 64;
pub const SLOT_AREA_SIZE: usize = PAGE_SIZE - HEADER_SIZE;
pub const PAGE_FILE_SIZE: usize = ENCODED_BLOCK_SIZE;
pub const MAGIC: [u8; 4] = *b"HPG1";
pub const FORMAT_VERSION: u16 = 1;
/// Table pages per `d<k>` directory.
pub const DIR_FANOUT: u32 = 256;

pub const SLOT_FREE: u8 = 0x00;
pub const SLOT_OCCUPIED: u8 = 0x5A;

/// Table id reserved for the catalog page.
pub const CATALOG_TABLE_ID: u32 = u32::MAX;
/// Page index reserved for a table's schema page.
pub const SCHEMA_PAGE_INDEX: u32 = u32::MAX;

const HEADER_WORDS: usize = HEADER_SIZE / 8;
const TEMP_SUFFIX: &str = "tmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId {
    pub table_id: u32,
    pub page_index: u32,
}

impl PageId {
    pub const CATALOG: PageId = PageId {
        table_id: CATALOG_TABLE_ID,
        page_index: 0,
    };

    pub fn new(table_id: u32, page_index: u32) -> Self {
        PageId {
            table_id,
            page_index,
        }
    }

    pub fn schema(table_id: u32) -> Self {
        PageId::new(table_id, SCHEMA_PAGE_INDEX)
    }

    /// Recovers the page id from a path relative to the storage root.
    pub fn from_relative_path(rel: &Path) -> Option<PageId> {
        let parts: Vec<&str> = rel.iter().map(|c| c.to_str()).collect::<Option<_>>()?;
        match parts.as_slice() {
            ["catalog.pg"] => Some(PageId::CATALOG),
            [t, "schema.pg"] => Some(PageId::schema(number(t, "t")?)),
            [t, d, p] => {
                let dir = number(d, "d")?;
                let page = number(p.strip_suffix(".pg")?, "p")?;
                if page >= DIR_FANOUT {
                    return None;
                }
                let index = dir.checked_mul(DIR_FANOUT)?.checked_add(page)?;
                Some(PageId::new(number(t, "t")?, index))
            }
            _ => None,
        }
    }
}

fn number(s: &str, prefix: &str) -> Option<u32> {
    let digits = s.strip_prefix(prefix)?;
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

/// Path of a page file under `root`.
pub fn page_path(root: &Path, pid: PageId) -> PathBuf {
    if pid == PageId::CATALOG {
        return root.join("catalog.pg");
    }
    let table_dir = root.join(format!("t{}", pid.table_id));
    if pid.page_index == SCHEMA_PAGE_INDEX {
        return table_dir.join("schema.pg");
    }
    table_dir
        .join(format!("d{}", pid.page_index / DIR_FANOUT))
        .join(format!("p{}.pg", pid.page_index % DIR_FANOUT))
}

pub fn table_dir(root: &Path, table_id: u32) -> PathBuf {
    root.join(format!("t{table_id}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHeader {
    pub table_id: u32,
    pub page_index: u32,
    pub slot_size: u16,
    pub slot_count: u16,
    pub record_count: u16,
}

impl PageHeader {
    pub fn new(pid: PageId, slot_size: u16) -> Self {
        PageHeader {
            table_id: pid.table_id,
            page_index: pid.page_index,
            slot_size,
            slot_count: slots_per_page(slot_size as usize) as u16,
            record_count: 0,
        }
    }

    pub fn write_to(&self, page: &mut [u8]) {
        let h = &mut page[..HEADER_SIZE];
        h.fill(0);
        h[0..4].copy_from_slice(&MAGIC);
        h[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        h[6..10].copy_from_slice(&self.table_id.to_le_bytes());
        h[10..14].copy_from_slice(&self.page_index.to_le_bytes());
        h[14..16].copy_from_slice(&self.slot_size.to_le_bytes());
        h[16..18].copy_from_slice(&self.slot_count.to_le_bytes());
        h[18..20].copy_from_slice(&self.record_count.to_le_bytes());
    }

    /// Parses the header fields without validating them.
    pub fn read_from(page: &[u8]) -> Self {
        let u16_at = |o: usize| u16::from_le_bytes([page[o], page[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(page[o..o + 4].try_into().unwrap());
        PageHeader {
            table_id: u32_at(6),
            page_index: u32_at(10),
            slot_size: u16_at(14),
            slot_count: u16_at(16),
            record_count: u16_at(18),
        }
    }

    pub fn set_record_count(page: &mut [u8], count: u16) {
        page[18..20].copy_from_slice(&count.to_le_bytes());
    }

    fn validate(page: &[u8], pid: PageId, path: &Path) -> Result<PageHeader> {
        let mismatch = |detail: String| Error::PageMismatch {
            path: path.to_path_buf(),
            detail,
        };
        if page[0..4] != MAGIC {
            return Err(mismatch(format!("bad magic {:02x?}", &page[0..4])));
        }
        let version = u16::from_le_bytes([page[4], page[5]]);
        if version != FORMAT_VERSION {
            return Err(mismatch(format!("unsupported format version {version}")));
        }
        let header = PageHeader::read_from(page);
        if header.table_id != pid.table_id || header.page_index != pid.page_index {
            return Err(mismatch(format!(
                "header names table {} page {}",
                header.table_id, header.page_index
            )));
        }
        if header.slot_size == 0
            || header.slot_count as usize != slots_per_page(header.slot_size as usize)
            || header.record_count > header.slot_count
        {
            return Err(mismatch(format!(
                "inconsistent slot geometry {}x{} ({} records)",
                header.slot_count, header.slot_size, header.record_count
            )));
        }
        Ok(header)
    }
}

pub fn slots_per_page(slot_size: usize) -> usize {
    SLOT_AREA_SIZE / slot_size
}

/// Byte range of slot `slot` within a page image.
pub fn slot_range(slot_size: usize, slot: usize) -> std::ops::Range<usize> {
    let start = HEADER_SIZE + slot * slot_size;
    start..start + slot_size
}

/// One decoded 4096-byte page.
#[derive(Clone, PartialEq, Eq)]
pub struct PageImage {
    bytes: Box<[u8]>,
}

impl std::fmt::Debug for PageImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PageImage")
            .field("header", &self.header())
            .finish_non_exhaustive()
    }
}

impl PageImage {
    /// An empty page with all slots free.
    pub fn new(header: PageHeader) -> Self {
        let mut bytes = vec![0u8; PAGE_SIZE].into_boxed_slice();
        header.write_to(&mut bytes);
        PageImage { bytes }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PAGE_SIZE {
            return Err(Error::InvalidBlockSize {
                expected: PAGE_SIZE,
                actual: bytes.len(),
            });
        }
        Ok(PageImage {
            bytes: bytes.into(),
        })
    }

    pub fn header(&self) -> PageHeader {
        PageHeader::read_from(&self.bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.bytes
    }

    pub fn slot(&self, slot: usize) -> &[u8] {
        let size = self.header().slot_size as usize;
        &self.bytes[slot_range(size, slot)]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [u8] {
        let size = self.header().slot_size as usize;
        &mut self.bytes[slot_range(size, slot)]
    }
}

/// A word that failed to decode, kept with its check byte as read so a
/// later write-back reproduces the damaged codeword instead of blessing
/// the unverified data with fresh check bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DamagedWord {
    pub index: u16,
    pub check: u8,
}

/// Slot indices overlapping any of the given word indices.
pub fn slots_touching_words(slot_size: usize, words: &[usize]) -> Vec<usize> {
    let slot_count = slots_per_page(slot_size);
    let mut slots: Vec<usize> = words
        .iter()
        .filter(|&&w| w >= HEADER_WORDS)
        .flat_map(|&w| {
            let first = (8 * w - HEADER_SIZE) / slot_size;
            let last = (8 * w + 7 - HEADER_SIZE) / slot_size;
            first..=last
        })
        .filter(|&s| s < slot_count)
        .collect();
    slots.sort_unstable();
    slots.dedup();
    slots
}

#[derive(Debug)]
pub struct PageRead {
    pub image: PageImage,
    pub report: BlockReport,
    pub damage: Vec<DamagedWord>,
}

/// Where a simulated crash interrupts the write protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    BeforeTempCreate,
    AfterTempCreate,
    /// After this many bytes of the temp file have been written.
    AfterBytes(usize),
    AfterSync,
    AfterRename,
}

#[derive(Debug)]
pub struct PageStore {
    root: PathBuf,
    sync_writes: bool,
    reads: AtomicU64,
    writes: AtomicU64,
}

impl PageStore {
    pub fn new(root: impl Into<PathBuf>, sync_writes: bool) -> Self {
        PageStore {
            root: root.into(),
            sync_writes,
            reads: AtomicU64::new(0),
            writes: AtomicU64::new(0),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, pid: PageId) -> PathBuf {
        page_path(&self.root, pid)
    }

    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn write_count(&self) -> u64 {
        self.writes.load(Ordering::Relaxed)
    }

    pub fn write_page(&self, pid: PageId, image: &PageImage) -> Result<()> {
        self.write_bytes(pid, image.as_bytes(), &[])
    }

    /// Encodes and writes `page`, restoring the as-read check byte for every
    /// damaged word.
    pub fn write_bytes(&self, pid: PageId, page: &[u8], damage: &[DamagedWord]) -> Result<()> {
        let encoded = encode_with_damage(page, damage)?;
        self.write_encoded(pid, &encoded, None).map(|_| ())
    }

    /// Runs the write protocol but stops at `point`, leaving whatever a crash
    /// there would leave behind.
    pub fn write_page_interrupted(
        &self,
        pid: PageId,
        image: &PageImage,
        point: CrashPoint,
    ) -> Result<()> {
        let encoded = encode_with_damage(image.as_bytes(), &[])?;
        self.write_encoded(pid, &encoded, Some(point)).map(|_| ())
    }

    fn write_encoded(
        &self,
        pid: PageId,
        encoded: &[u8; PAGE_FILE_SIZE],
        stop: Option<CrashPoint>,
    ) -> Result<bool> {
        let path = self.path_of(pid);
        let tmp = path.with_extension(format!("pg.{TEMP_SUFFIX}"));
        if stop == Some(CrashPoint::BeforeTempCreate) {
            return Ok(false);
        }
        let mut file = match create_truncate(&tmp) {
            Err(e) if e.kind() == ErrorKind::NotFound => {
                let parent = tmp.parent().expect("page paths have a parent");
                fs::create_dir_all(parent).map_err(|e| Error::storage(parent, e))?;
                create_truncate(&tmp)
            }
            other => other,
        }
        .map_err(|e| Error::storage(&tmp, e))?;
        match stop {
            Some(CrashPoint::AfterTempCreate) => return Ok(false),
            Some(CrashPoint::AfterBytes(n)) => {
                let n = n.min(PAGE_FILE_SIZE);
                file.write_all(&encoded[..n])
                    .map_err(|e| Error::storage(&tmp, e))?;
                return Ok(false);
            }
            _ => {}
        }
        file.write_all(encoded)
            .map_err(|e| Error::storage(&tmp, e))?;
        if self.sync_writes {
            file.sync_data().map_err(|e| Error::storage(&tmp, e))?;
        }
        drop(file);
        if stop == Some(CrashPoint::AfterSync) {
            return Ok(false);
        }
        fs::rename(&tmp, &path).map_err(|e| Error::storage(&path, e))?;
        self.writes.fetch_add(1, Ordering::Relaxed);
        Ok(true)
    }

    pub fn read_page(&self, pid: PageId) -> Result<PageRead> {
        let mut image = PageImage {
            bytes: vec![0u8; PAGE_SIZE].into_boxed_slice(),
        };
        let (report, damage) = self.read_into(pid, &mut image.bytes)?;
        Ok(PageRead {
            image,
            report,
            damage,
        })
    }

    /// Reads and decodes a page into `out` (4096 bytes). Corrections are not
    /// written back.
    pub fn read_into(
        &self,
        pid: PageId,
        out: &mut [u8],
    ) -> Result<(BlockReport, Vec<DamagedWord>)> {
        let path = self.path_of(pid);
        let encoded = read_file(&path)?;
        self.reads.fetch_add(1, Ordering::Relaxed);
        let report = ecc::decode_block_into(&encoded, out)?;
        check_decoded(out, &report, pid, &path)?;
        let damage = report
            .uncorrectable_word_indices
            .iter()
            .map(|&i| DamagedWord {
                index: i as u16,
                check: encoded[PAGE_SIZE + i],
            })
            .collect();
        Ok((report, damage))
    }

    pub fn delete_page(&self, pid: PageId) -> Result<()> {
        let path = self.path_of(pid);
        fs::remove_file(&path).map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::PageNotFound { path: path.clone() },
            _ => Error::storage(&path, e),
        })
    }

    /// Corrects a page file at rest. The file is rewritten only when every
    /// error was correctable.
    pub fn scrub_page(&self, pid: PageId) -> Result<BlockReport> {
        let path = self.path_of(pid);
        let encoded = read_file(&path)?;
        let mut plain = [0u8; PAGE_SIZE];
        let report = ecc::decode_block_into(&encoded, &mut plain)?;
        check_decoded(&plain, &report, pid, &path)?;
        if report.corrected_count > 0 && report.uncorrectable_word_indices.is_empty() {
            let fixed = encode_with_damage(&plain, &[])?;
            self.write_encoded(pid, &fixed, None)?;
        }
        Ok(report)
    }
}

fn create_truncate(path: &Path) -> std::io::Result<File> {
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(path)
}

fn read_file(path: &Path) -> Result<[u8; PAGE_FILE_SIZE]> {
    let mut file = File::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::PageNotFound {
            path: path.to_path_buf(),
        },
        _ => Error::storage(path, e),
    })?;
    let mut encoded = [0u8; PAGE_FILE_SIZE];
    file.read_exact(&mut encoded)
        .map_err(|e| Error::storage(path, e))?;
    let mut extra = [0u8; 1];
    if file.read(&mut extra).map_err(|e| Error::storage(path, e))? != 0 {
        return Err(Error::storage(
            path,
            std::io::Error::new(ErrorKind::InvalidData, "page file longer than 4608 bytes"),
        ));
    }
    Ok(encoded)
}

fn check_decoded(plain: &[u8], report: &BlockReport, pid: PageId, path: &Path) -> Result<()> {
    if report
        .uncorrectable_word_indices
        .iter()
        .any(|&w| w < HEADER_WORDS)
    {
        return Err(Error::PageCorrupt {
            path: path.to_path_buf(),
        });
    }
    PageHeader::validate(plain, pid, path).map(|_| ())
}

fn encode_with_damage(page: &[u8], damage: &[DamagedWord]) -> Result<[u8; PAGE_FILE_SIZE]> {
    let mut encoded = [0u8; PAGE_FILE_SIZE];
    ecc::encode_block_into(page, &mut encoded)?;
    for d in damage {
        encoded[PAGE_SIZE + d.index as usize] = d.check;
    }
    Ok(encoded)
}
