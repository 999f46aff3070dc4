//! Single-event-upset simulation over a storage root.
//!
//! Bits are numbered LSB-first within each byte: file bit `n` is bit
//! `n % 8` of byte `n / 8`. Every injection is recorded so it can be audited
//! and undone by applying the same flips again.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walkdir::WalkDir;

use crate::ecc::{BlockReport, BLOCK_SIZE};
use crate::error::{Error, Result};
use crate::page::{
    CrashPoint, PageHeader, PageId, PageImage, PageStore, PAGE_FILE_SIZE, SLOT_OCCUPIED,
};
use crate::table::{lock_root, Database, DbConfig, Row, RowId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipRecord {
    pub path: PathBuf,
    pub bit_offset: u64,
    pub original_bit: u8,
}

impl FlipRecord {
    /// One audit line: `<path>\t<bit_offset>\t<original_bit>`, with the path
    /// relative to `root` when it lies under it.
    pub fn audit_line(&self, root: &Path) -> String {
        let path = self.path.strip_prefix(root).unwrap_or(&self.path);
        format!(
            "{}\t{}\t{}\n",
            path.display(),
            self.bit_offset,
            self.original_bit
        )
    }

    pub fn parse_audit_line(root: &Path, line: &str) -> Option<FlipRecord> {
        let mut parts = line.trim_end_matches('\n').split('\t');
        let path = root.join(parts.next()?);
        let bit_offset = parts.next()?.parse().ok()?;
        let original_bit = parts.next()?.parse().ok().filter(|b| *b <= 1)?;
        parts.next().is_none().then_some(FlipRecord {
            path,
            bit_offset,
            original_bit,
        })
    }
}

/// Inverts one bit of a file in place.
pub fn flip_bit(path: &Path, bit_offset: u64) -> Result<FlipRecord> {
    let mut file = OpenOptions::new()
        .read(true)
        .write(true)
        .open(path)
        .map_err(|e| Error::storage(path, e))?;
    let bits = file.metadata().map_err(|e| Error::storage(path, e))?.len() * 8;
    if bit_offset >= bits {
        return Err(Error::InvalidOffset {
            path: path.to_path_buf(),
            offset: bit_offset,
            bits,
        });
    }
    let mut byte = [0u8; 1];
    let at = SeekFrom::Start(bit_offset / 8);
    file.seek(at).map_err(|e| Error::storage(path, e))?;
    file.read_exact(&mut byte)
        .map_err(|e| Error::storage(path, e))?;
    let mask = 1u8 << (bit_offset % 8);
    let original_bit = u8::from(byte[0] & mask != 0);
    byte[0] ^= mask;
    file.seek(at).map_err(|e| Error::storage(path, e))?;
    file.write_all(&byte).map_err(|e| Error::storage(path, e))?;
    Ok(FlipRecord {
        path: path.to_path_buf(),
        bit_offset,
        original_bit,
    })
}

/// File bit offset of codeword bit `bit` (0..72) of word `word` in a page
/// file: bits 0..64 are the data word, 64..72 its check byte.
pub fn codeword_bit_offset(word: usize, bit: usize) -> u64 {
    assert!(word < BLOCK_SIZE / 8 && bit < 72);
    if bit < 64 {
        (word * 64 + bit) as u64
    } else {
        ((BLOCK_SIZE + word) * 8 + bit - 64) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipCount {
    /// This many distinct bits in every page file.
    PerFile(usize),
    /// This many flips spread over the file set, each at a uniformly chosen
    /// file and position. No bit is chosen twice.
    Total(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectionPlan {
    pub seed: u64,
    pub flips: FlipCount,
}

/// All `*.pg` files under `root` in lexicographic order of their relative
/// paths.
pub fn page_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in WalkDir::new(root) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::storage(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "pg") {
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            files.push((
                rel.to_string_lossy().into_owned(),
                entry.path().to_path_buf(),
            ));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Applies `plan` to every page file under `root`. Holds the root lock, so
/// it fails while a database is open on the same root.
pub fn inject(root: &Path, plan: &InjectionPlan) -> Result<Vec<FlipRecord>> {
    let _lock = lock_root(root)?;
    let files = page_files(root)?;
    if files.is_empty() {
        return Err(Error::NothingToInject {
            path: root.to_path_buf(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut targets: Vec<(usize, u64)> = Vec::new();
    match plan.flips {
        FlipCount::PerFile(n) => {
            for (i, path) in files.iter().enumerate() {
                let bits = file_bits(path)?;
                let n = n.min(bits as usize);
                targets.extend(
                    index::sample(&mut rng, bits as usize, n)
                        .into_iter()
                        .map(|b| (i, b as u64)),
                );
            }
        }
        FlipCount::Total(n) => {
            let sizes: Vec<u64> = files.iter().map(|p| file_bits(p)).collect::<Result<_>>()?;
            let capacity: u64 = sizes.iter().sum();
            let n = (n as u64).min(capacity) as usize;
            while targets.len() < n {
                let file = rng.gen_range(0..files.len());
                let bit = rng.gen_range(0..sizes[file]);
                if !targets.contains(&(file, bit)) {
                    targets.push((file, bit));
                }
            }
        }
    }
    targets
        .into_iter()
        .map(|(file, bit)| flip_bit(&files[file], bit))
        .collect()
}

fn file_bits(path: &Path) -> Result<u64> {
    Ok(std::fs::metadata(path)
        .map_err(|e| Error::storage(path, e))?
        .len()
        * 8)
}

/// Undoes `records` by flipping the same bits again.
pub fn revert(records: &[FlipRecord]) -> Result<()> {
    for r in records.iter().rev() {
        flip_bit(&r.path, r.bit_offset)?;
    }
    Ok(())
}

/// Every row of every table, captured through the normal read path.
pub type Snapshot = BTreeMap<String, Vec<(RowId, Row)>>;

pub fn snapshot(root: &Path) -> Result<Snapshot> {
    let db = Database::open(root, DbConfig::default())?;
    snapshot_db(&db)
}

pub fn snapshot_db(db: &Database) -> Result<Snapshot> {
    db.table_names()
        .into_iter()
        .map(|name| {
            let rows = db.scan(&name, None)?;
            Ok((name, rows))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub matched: usize,
    pub mismatched: usize,
    pub unreadable: usize,
}

impl VerifyReport {
    pub fn total(&self) -> usize {
        self.matched + self.mismatched + self.unreadable
    }

    pub fn is_clean(&self) -> bool {
        self.mismatched == 0 && self.unreadable == 0
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "matched {} mismatched {} unreadable {}",
            self.matched, self.mismatched, self.unreadable
        )
    }
}

/// Re-reads every expected row and classifies it. A database that cannot be
/// opened counts every row as unreadable.
pub fn verify(root: &Path, expected: &Snapshot) -> VerifyReport {
    let config = DbConfig {
        sync_writes: false,
        ..DbConfig::default()
    };
    match Database::open(root, config) {
        Ok(db) => verify_db(&db, expected),
        Err(_) => VerifyReport {
            unreadable: expected.values().map(Vec::len).sum(),
            ..VerifyReport::default()
        },
    }
}

pub fn verify_db(db: &Database, expected: &Snapshot) -> VerifyReport {
    let mut report = VerifyReport::default();
    for (table, rows) in expected {
        for (rid, row) in rows {
            match db.get_row(table, *rid) {
                Ok(got) if got == *row => report.matched += 1,
                Ok(_) | Err(Error::RowNotFound(_)) | Err(Error::TableNotFound(_)) => {
                    report.mismatched += 1
                }
                Err(_) => report.unreadable += 1,
            }
        }
    }
    report
}

/// Totals from scrubbing every page file under a root.
#[derive(Debug, Default)]
pub struct ScrubSummary {
    pub pages: usize,
    pub corrected: usize,
    pub uncorrectable: usize,
    /// Per-file reports, in page-file order.
    pub reports: Vec<(PathBuf, BlockReport)>,
    /// Files that could not be scrubbed (unknown name, corrupt header, ...).
    pub failed: Vec<(PathBuf, Error)>,
}

pub fn scrub_all(root: &Path) -> Result<ScrubSummary> {
    let _lock = lock_root(root)?;
    let store = PageStore::new(root, true);
    let mut summary = ScrubSummary::default();
    for path in page_files(root)? {
        let rel = path.strip_prefix(root).unwrap_or(&path);
        let Some(pid) = PageId::from_relative_path(rel) else {
            continue;
        };
        summary.pages += 1;
        match store.scrub_page(pid) {
            Ok(report) => {
                summary.corrected += report.corrected_count;
                summary.uncorrectable += report.uncorrectable_count();
                summary.reports.push((path, report));
            }
            Err(e) => summary.failed.push((path, e)),
        }
    }
    Ok(summary)
}

#[derive(Debug, Default)]
pub struct CrashVerdict {
    pub points_tested: usize,
    pub failures: Vec<String>,
}

impl CrashVerdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const CRASH_DIR: &str = ".crashtest";

/// Interrupts the page write protocol at every step (and every 64 bytes of
/// the temp-file write) and checks that a read afterwards sees either the
/// previous image or the new one. Runs in a scratch directory under `root`.
pub fn crash_write_test(root: &Path) -> Result<CrashVerdict> {
    let scratch = root.join(CRASH_DIR);
    std::fs::create_dir_all(&scratch).map_err(|e| Error::storage(&scratch, e))?;
    let store = PageStore::new(&scratch, true);
    let pid = PageId::new(0, 0);
    let image = |marker: u8| {
        let mut h = PageHeader::new(pid, 16);
        h.record_count = 1;
        let mut img = PageImage::new(h);
        img.slot_mut(0)[0] = SLOT_OCCUPIED;
        img.slot_mut(0)[1..].fill(marker);
        img
    };
    let (old, new) = (image(0x11), image(0xEE));

    let mut points = vec![CrashPoint::BeforeTempCreate, CrashPoint::AfterTempCreate];
    points.extend((0..PAGE_FILE_SIZE).step_by(64).map(CrashPoint::AfterBytes));
    points.push(CrashPoint::AfterBytes(PAGE_FILE_SIZE - 1));
    points.push(CrashPoint::AfterSync);
    points.push(CrashPoint::AfterRename);

    let mut verdict = CrashVerdict::default();
    for had_old in [true, false] {
        for point in points.iter().map(Some).chain([None]) {
            let _ = std::fs::remove_dir_all(scratch.join("t0"));
            if had_old {
                store.write_page(pid, &old)?;
            }
            match point {
                Some(&p) => store.write_page_interrupted(pid, &new, p)?,
                None => store.write_page(pid, &new)?,
            }
            verdict.points_tested += 1;
            let completed = matches!(point, None | Some(CrashPoint::AfterRename));
            let outcome = match store.read_page(pid) {
                Ok(read) if read.image == new => Some("new"),
                Ok(read) if read.image == old => Some("old"),
                Ok(_) => None,
                Err(Error::PageNotFound { .. }) => Some("absent"),
                Err(_) => None,
            };
            let acceptable = match (completed, had_old) {
                (true, _) => outcome == Some("new"),
                (false, true) => outcome == Some("old"),
                (false, false) => outcome == Some("absent"),
            };
            if !acceptable {
                verdict.failures.push(format!(
                    "{point:?} (previous image: {had_old}) left {}",
                    outcome.unwrap_or("a torn or unreadable page")
                ));
            }
        }
    }
    std::fs::remove_dir_all(&scratch).map_err(|e| Error::storage(&scratch, e))?;
    Ok(verdict)
}
