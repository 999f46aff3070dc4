use std::io;
use std::path::PathBuf;

use crate::table::RowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid block size: expected {expected} bytes, got {actual}")]
    InvalidBlockSize { expected: usize, actual: usize },

    #[error("invalid pool configuration: {block_count} blocks of {block_size} bytes")]
    InvalidPoolConfig {
        block_count: usize,
        block_size: usize,
    },
    #[error("block pool exhausted")]
    PoolExhausted,
    #[error("block handle {0} is out of range")]
    InvalidHandle(u32),
    #[error("block {0} released twice")]
    DoubleFree(u32),

    #[error("storage error at {}: {source}", path.display())]
    Storage {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("page not found: {}", path.display())]
    PageNotFound { path: PathBuf },
    #[error("page header unrecoverable: {}", path.display())]
    PageCorrupt { path: PathBuf },
    #[error("page header mismatch in {}: {detail}", path.display())]
    PageMismatch { path: PathBuf, detail: String },
    #[error("database at {} is locked by another process", path.display())]
    DatabaseLocked { path: PathBuf },

    #[error("table `{0}` already exists")]
    TableExists(String),
    #[error("table `{0}` not found")]
    TableNotFound(String),
    #[error("catalog is full ({max} tables)")]
    CatalogFull { max: usize },
    #[error("row too large: slot size {slot_size} exceeds {max} bytes")]
    RowTooLarge { slot_size: usize, max: usize },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("row {0} not found")]
    RowNotFound(RowId),
    #[error("row {0} is unreadable (uncorrectable bit errors)")]
    RowCorrupt(RowId),

    #[error("cache saturated: every frame and overflow buffer is pinned")]
    CacheSaturated,
    #[error("unpin of a page that is not pinned")]
    PinUnderflow,

    #[error("lex error at offset {offset}: {message}")]
    Lex { offset: usize, message: String },
    #[error("parse error at offset {offset}: expected {expected}, found {found}")]
    Parse {
        expected: String,
        found: String,
        offset: usize,
    },

    #[error("bit offset {offset} is beyond the end of {} ({bits} bits)", path.display())]
    InvalidOffset {
        path: PathBuf,
        offset: u64,
        bits: u64,
    },
    #[error("no page files to inject into under {}", path.display())]
    NothingToInject { path: PathBuf },
    #[error("bench table already exists")]
    BenchTableExists,
}

impl Error {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Storage {
            path: path.into(),
            source,
        }
    }

    /// True for tokenizer and parser failures, as opposed to execution errors.
    pub fn is_syntax(&self) -> bool {
        matches!(self, Error::Lex { .. } | Error::Parse { .. })
    }

    /// Byte offset into the statement text for syntax errors.
    pub fn offset(&self) -> Option<usize> {
        match self {
            Error::Lex { offset, .. } | Error::Parse { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}
