//! Fixed-size block pool with an intrusive singly-linked free list.
//!
//! Every block is allocated once when the pool is created. A free block stores
//! the index of the next free block in its first 8 bytes (`u64::MAX` ends the
//! list), so allocation and release only ever touch the list head. A side
//! bitmap records which blocks are live to catch double releases.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{Error, Result};

const LINK_BYTES: usize = 8;
const END_OF_LIST: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockHandle {
    index: u32,
}

impl BlockHandle {
    pub fn index(self) -> u32 {
        self.index
    }

    pub(crate) fn from_index(index: u32) -> Self {
        BlockHandle { index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolStats {
    pub free: usize,
    pub used: usize,
}

#[derive(Debug)]
struct FreeList {
    head: Option<u32>,
    free_count: usize,
    live: Vec<u64>,
}

impl FreeList {
    fn is_live(&self, index: u32) -> bool {
        self.live[index as usize / 64] >> (index % 64) & 1 == 1
    }

    fn set_live(&mut self, index: u32, live: bool) {
        let word = &mut self.live[index as usize / 64];
        if live {
            *word |= 1 << (index % 64);
        } else {
            *word &= !(1 << (index % 64));
        }
    }
}

#[derive(Debug)]
pub struct BlockPool {
    block_size: usize,
    blocks: Box<[RwLock<Box<[u8]>>]>,
    list: Mutex<FreeList>,
    link_ops: AtomicU64,
}

impl BlockPool {
    pub fn new(block_count: usize, block_size: usize) -> Result<Self> {
        if block_count == 0 || block_size < LINK_BYTES || block_count > u32::MAX as usize {
            return Err(Error::InvalidPoolConfig {
                block_count,
                block_size,
            });
        }
        let blocks: Box<[RwLock<Box<[u8]>>]> = (0..block_count)
            .map(|i| {
                let mut block = vec![0u8; block_size].into_boxed_slice();
                let next = if i + 1 < block_count {
                    (i + 1) as u64
                } else {
                    END_OF_LIST
                };
                block[..LINK_BYTES].copy_from_slice(&next.to_le_bytes());
                RwLock::new(block)
            })
            .collect();
        Ok(BlockPool {
            block_size,
            blocks,
            list: Mutex::new(FreeList {
                head: Some(0),
                free_count: block_count,
                live: vec![0; block_count.div_ceil(64)],
            }),
            link_ops: AtomicU64::new(0),
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn alloc(&self) -> Result<BlockHandle> {
        let mut list = self.list.lock().unwrap();
        let index = list.head.ok_or(Error::PoolExhausted)?;
        let next = {
            let block = self.blocks[index as usize].read().unwrap();
            u64::from_le_bytes(block[..LINK_BYTES].try_into().unwrap())
        };
        self.link_ops.fetch_add(1, Ordering::Relaxed);
        list.head = (next != END_OF_LIST).then_some(next as u32);
        list.free_count -= 1;
        list.set_live(index, true);
        Ok(BlockHandle { index })
    }

    pub fn release(&self, handle: BlockHandle) -> Result<()> {
        let index = handle.index;
        if index as usize >= self.blocks.len() {
            return Err(Error::InvalidHandle(index));
        }
        let mut list = self.list.lock().unwrap();
        if !list.is_live(index) {
            return Err(Error::DoubleFree(index));
        }
        let next = list.head.map_or(END_OF_LIST, u64::from);
        self.blocks[index as usize].write().unwrap()[..LINK_BYTES]
            .copy_from_slice(&next.to_le_bytes());
        self.link_ops.fetch_add(1, Ordering::Relaxed);
        list.head = Some(index);
        list.free_count += 1;
        list.set_live(index, false);
        Ok(())
    }

    pub fn stats(&self) -> PoolStats {
        let list = self.list.lock().unwrap();
        PoolStats {
            free: list.free_count,
            used: self.blocks.len() - list.free_count,
        }
    }

    /// Shared access to a block's bytes.
    pub fn read(&self, handle: BlockHandle) -> RwLockReadGuard<'_, Box<[u8]>> {
        self.blocks[handle.index as usize].read().unwrap()
    }

    /// Exclusive access to a block's bytes.
    pub fn write(&self, handle: BlockHandle) -> RwLockWriteGuard<'_, Box<[u8]>> {
        self.blocks[handle.index as usize].write().unwrap()
    }

    /// Number of free-list link reads and writes performed so far.
    pub fn link_ops(&self) -> u64 {
        self.link_ops.load(Ordering::Relaxed)
    }

    /// Walks the free list and returns the visited indices, or `None` when
    /// the list is inconsistent (cycle, out-of-range link, live block on the
    /// list, or length different from the free count).
    pub fn free_list_indices(&self) -> Option<Vec<u32>> {
        let list = self.list.lock().unwrap();
        let mut seen = vec![false; self.blocks.len()];
        let mut out = Vec::with_capacity(list.free_count);
        let mut cursor = list.head;
        while let Some(index) = cursor {
            let i = index as usize;
            if i >= seen.len() || seen[i] || list.is_live(index) {
                return None;
            }
            seen[i] = true;
            out.push(index);
            let block = self.blocks[i].read().unwrap();
            let next = u64::from_le_bytes(block[..LINK_BYTES].try_into().unwrap());
            cursor = (next != END_OF_LIST).then_some(next as u32);
        }
        (out.len() == list.free_count).then_some(out)
    }
}
