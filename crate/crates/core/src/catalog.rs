//! Catalog and schema page formats.
//!
//! The catalog is a single page (`catalog.pg`) holding up to 63 table
//! descriptors of 64 bytes each, descriptor `i` at offset `64 + 64 * i`.
//! The descriptor index is the table id.
//!
//! ```text
//!   0..24   table name, zero-padded
//!   24      status: 0x5A in use, 0x00 free
//!   25      column count
//!   26..28  slot size
//!   28..32  page count
//!   32..40  record count
//!   40..44  last-insert hint: page index
//!   44..46  last-insert hint: slot
//!   46..48  zero
//!   48..64  column widths in order: 0 = INT, n = STR(n); unused entries 0
//! ```
//!
//! Column names do not fit in a descriptor, so each table also has a schema
//! page (`t<id>/schema.pg`) with one 32-byte entry per column at
//! `64 + 32 * i`: name (24 bytes, zero-padded), kind (1 = INT, 2 = STR),
//! width (u16), zero padding. The widths in the descriptor must agree with
//! the schema page.

use crate::error::{Error, Result};
use crate::page::{PageHeader, PageId, HEADER_SIZE, PAGE_SIZE};
use crate::schema::{ColumnDef, ColumnType, TableSchema, MAX_COLUMNS, MAX_NAME_LEN};
use crate::table::RowId;

pub const DESCRIPTOR_SIZE: usize = 64;
pub const MAX_TABLES: usize = (PAGE_SIZE - HEADER_SIZE) / DESCRIPTOR_SIZE;
const IN_USE: u8 = 0x5A;

const SCHEMA_ENTRY_SIZE: usize = 32;
const KIND_INT: u8 = 1;
const KIND_STR: u8 = 2;

/// Persisted table metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub table_id: u32,
    pub schema: TableSchema,
    pub page_count: u32,
    pub record_count: u64,
    pub last_insert_hint: RowId,
}

/// Descriptor fields as stored; the schema comes from the schema page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub name: String,
    pub column_widths: Vec<ColumnType>,
    pub slot_size: u16,
    pub page_count: u32,
    pub record_count: u64,
    pub last_insert_hint: RowId,
}

pub fn catalog_header(table_count: usize) -> PageHeader {
    let mut h = PageHeader::new(PageId::CATALOG, DESCRIPTOR_SIZE as u16);
    h.record_count = table_count as u16;
    h
}

/// Writes the full catalog page image into `page`.
pub fn write_catalog(page: &mut [u8], tables: &[Option<TableMeta>]) {
    assert!(tables.len() <= MAX_TABLES);
    page.fill(0);
    catalog_header(tables.iter().flatten().count()).write_to(page);
    for (i, meta) in tables.iter().enumerate() {
        if let Some(meta) = meta {
            let off = HEADER_SIZE + i * DESCRIPTOR_SIZE;
            encode_descriptor(meta, &mut page[off..off + DESCRIPTOR_SIZE]);
        }
    }
}

fn encode_descriptor(meta: &TableMeta, d: &mut [u8]) {
    let name = meta.schema.name().as_bytes();
    d[..name.len()].copy_from_slice(name);
    d[24] = IN_USE;
    d[25] = meta.schema.columns().len() as u8;
    d[26..28].copy_from_slice(&(meta.schema.slot_size() as u16).to_le_bytes());
    d[28..32].copy_from_slice(&meta.page_count.to_le_bytes());
    d[32..40].copy_from_slice(&meta.record_count.to_le_bytes());
    d[40..44].copy_from_slice(&meta.last_insert_hint.page_index.to_le_bytes());
    d[44..46].copy_from_slice(&meta.last_insert_hint.slot.to_le_bytes());
    for (i, col) in meta.schema.columns().iter().enumerate() {
        d[48 + i] = match col.ty {
            ColumnType::Int => 0,
            ColumnType::Str(n) => n as u8,
        };
    }
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::PageMismatch {
        path: "catalog.pg".into(),
        detail: detail.into(),
    }
}

/// Reads descriptors from a decoded catalog page, indexed by table id.
pub fn read_catalog(page: &[u8]) -> Result<Vec<Option<Descriptor>>> {
    let mut out = Vec::with_capacity(MAX_TABLES);
    for i in 0..MAX_TABLES {
        let off = HEADER_SIZE + i * DESCRIPTOR_SIZE;
        let d = &page[off..off + DESCRIPTOR_SIZE];
        out.push(match d[24] {
            0 if d.iter().all(|&b| b == 0) => None,
            IN_USE => Some(decode_descriptor(d)?),
            _ => return Err(corrupt(format!("descriptor {i} has bad status"))),
        });
    }
    Ok(out)
}

fn decode_descriptor(d: &[u8]) -> Result<Descriptor> {
    let name = padded_str(&d[..MAX_NAME_LEN]).ok_or_else(|| corrupt("bad table name"))?;
    let columns = d[25] as usize;
    if columns == 0 || columns > MAX_COLUMNS {
        return Err(corrupt(format!("`{name}` has {columns} columns")));
    }
    let column_widths = d[48..48 + columns]
        .iter()
        .map(|&w| match w {
            0 => ColumnType::Int,
            n => ColumnType::Str(n as u16),
        })
        .collect();
    Ok(Descriptor {
        name,
        column_widths,
        slot_size: u16::from_le_bytes([d[26], d[27]]),
        page_count: u32::from_le_bytes(d[28..32].try_into().unwrap()),
        record_count: u64::from_le_bytes(d[32..40].try_into().unwrap()),
        last_insert_hint: RowId {
            page_index: u32::from_le_bytes(d[40..44].try_into().unwrap()),
            slot: u16::from_le_bytes([d[44], d[45]]),
        },
    })
}

fn padded_str(bytes: &[u8]) -> Option<String> {
    let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
    if bytes[end..].iter().any(|&b| b != 0) {
        return None;
    }
    std::str::from_utf8(&bytes[..end]).ok().map(str::to_owned)
}

/// Builds the schema page image for a table.
pub fn write_schema_page(page: &mut [u8], table_id: u32, schema: &TableSchema) {
    page.fill(0);
    let mut h = PageHeader::new(PageId::schema(table_id), SCHEMA_ENTRY_SIZE as u16);
    h.record_count = schema.columns().len() as u16;
    h.write_to(page);
    for (i, col) in schema.columns().iter().enumerate() {
        let off = HEADER_SIZE + i * SCHEMA_ENTRY_SIZE;
        let e = &mut page[off..off + SCHEMA_ENTRY_SIZE];
        e[..col.name.len()].copy_from_slice(col.name.as_bytes());
        let (kind, width) = match col.ty {
            ColumnType::Int => (KIND_INT, 8u16),
            ColumnType::Str(n) => (KIND_STR, n),
        };
        e[24] = kind;
        e[25..27].copy_from_slice(&width.to_le_bytes());
    }
}

/// Rebuilds a table schema from its descriptor and schema page.
pub fn read_schema_page(page: &[u8], descriptor: &Descriptor) -> Result<TableSchema> {
    let header = PageHeader::read_from(page);
    if header.record_count as usize != descriptor.column_widths.len() {
        return Err(corrupt(format!(
            "schema page of `{}` lists {} columns, catalog says {}",
            descriptor.name,
            header.record_count,
            descriptor.column_widths.len()
        )));
    }
    let mut columns = Vec::with_capacity(descriptor.column_widths.len());
    for (i, expected) in descriptor.column_widths.iter().enumerate() {
        let off = HEADER_SIZE + i * SCHEMA_ENTRY_SIZE;
        let e = &page[off..off + SCHEMA_ENTRY_SIZE];
        let name = padded_str(&e[..MAX_NAME_LEN]).ok_or_else(|| corrupt("bad column name"))?;
        let width = u16::from_le_bytes([e[25], e[26]]);
        let ty = match e[24] {
            KIND_INT if width == 8 => ColumnType::Int,
            KIND_STR => ColumnType::Str(width),
            k => {
                return Err(corrupt(format!(
                    "column `{name}` has kind {k} width {width}"
                )))
            }
        };
        if ty != *expected {
            return Err(corrupt(format!(
                "column `{name}` is {ty} in the schema page but {expected} in the catalog"
            )));
        }
        columns.push(ColumnDef { name, ty });
    }
    let schema = TableSchema::new(descriptor.name.clone(), columns)?;
    if schema.slot_size() != descriptor.slot_size as usize {
        return Err(corrupt(format!(
            "slot size mismatch for `{}`",
            descriptor.name
        )));
    }
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: u32) -> TableMeta {
        TableMeta {
            table_id: id,
            schema: TableSchema::new(
                "users",
                vec![
                    ColumnDef::new("id", ColumnType::Int),
                    ColumnDef::new("name", ColumnType::Str(20)),
                ],
            )
            .unwrap(),
            page_count: 3,
            record_count: 300,
            last_insert_hint: RowId {
                page_index: 2,
                slot: 22,
            },
        }
    }

    #[test]
    fn descriptor_golden_bytes() {
        let mut tables = vec![None; MAX_TABLES];
        tables[1] = Some(meta(1));
        let mut page = vec![0u8; PAGE_SIZE];
        write_catalog(&mut page, &tables);
        assert_eq!(MAX_TABLES, 63);
        assert!(page[64..128].iter().all(|&b| b == 0));
        let d = &page[128..192];
        let mut expected = [0u8; 64];
        expected[..5].copy_from_slice(b"users");
        expected[24] = 0x5A;
        expected[25] = 2;
        expected[26] = 29;
        expected[28] = 3;
        expected[32..34].copy_from_slice(&300u16.to_le_bytes());
        expected[40] = 2;
        expected[44] = 22;
        expected[48] = 0;
        expected[49] = 20;
        assert_eq!(d, &expected[..]);
        let h = PageHeader::read_from(&page);
        assert_eq!((h.slot_size, h.slot_count, h.record_count), (64, 63, 1));
    }

    #[test]
    fn catalog_and_schema_round_trip() {
        let m = meta(4);
        let mut tables = vec![None; MAX_TABLES];
        tables[4] = Some(m.clone());
        let mut page = vec![0u8; PAGE_SIZE];
        write_catalog(&mut page, &tables);
        let descriptors = read_catalog(&page).unwrap();
        let d = descriptors[4].as_ref().unwrap();
        assert_eq!(descriptors.iter().flatten().count(), 1);
        assert_eq!(
            (d.page_count, d.record_count, d.last_insert_hint),
            (3, 300, m.last_insert_hint)
        );

        let mut schema_page = vec![0u8; PAGE_SIZE];
        write_schema_page(&mut schema_page, 4, &m.schema);
        assert_eq!(read_schema_page(&schema_page, d).unwrap(), m.schema);
    }

    #[test]
    fn schema_page_must_agree_with_descriptor() {
        let m = meta(0);
        let mut tables = vec![None; MAX_TABLES];
        tables[0] = Some(m.clone());
        let mut page = vec![0u8; PAGE_SIZE];
        write_catalog(&mut page, &tables);
        let mut d = read_catalog(&page).unwrap()[0].clone().unwrap();
        d.column_widths[1] = ColumnType::Str(21);
        let mut schema_page = vec![0u8; PAGE_SIZE];
        write_schema_page(&mut schema_page, 0, &m.schema);
        assert!(read_schema_page(&schema_page, &d).is_err());
    }
}
