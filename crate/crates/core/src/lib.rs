//! An embedded table store whose pages carry SECDED error-correcting codes,
//! so single bit flips in stored data are repaired on read and scrub.
//!
//! Layers, bottom up: [`ecc`] (72,64 codec), [`pool`] (fixed-size block
//! allocator), [`page`] (slotted page files), [`cache`] (pinning clock
//! cache), [`table`] (tables and rows), [`sql`] (statement front end),
//! [`fault`] (bit-flip injection and verification), [`shell`] (operator
//! commands).

pub mod cache;
pub mod catalog;
pub mod ecc;
pub mod error;
pub mod fault;
pub mod page;
pub mod pool;
pub mod schema;
pub mod shell;
pub mod sql;
pub mod table;

pub use error::{Error, Result};
pub use schema::{ColumnDef, ColumnType, Predicate, Value};
pub use table::{Database, DbConfig, Row, RowId};
