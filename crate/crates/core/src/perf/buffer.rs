use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::ProjectionKey;

/// What a buffer entry holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BufKey {
    /// Layer, key, vertex.
    Projected(u32, ProjectionKey, u32),
    /// Layer, lane, graph, target.
    Partial(u32, u32, u32, u32),
    /// Layer, graph, target.
    Semantic(u32, u32, u32),
    /// Layer, type, target.
    Fused(u32, u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Access {
    pub hit: bool,
    /// Bytes read from DRAM to satisfy a miss on spilled data.
    pub read: u64,
    /// Dirty bytes written back by evictions.
    pub written: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BufferStats {
    pub accesses: u64,
    pub hits: u64,
    pub hit_rate: f64,
}

/// Byte-capacity LRU cache with write-back.
///
/// A miss only costs a DRAM read when the entry was produced earlier and
/// then evicted; a first touch allocates in place.
#[derive(Debug, Clone)]
pub struct BufferModel {
    capacity: u64,
    granularity: u64,
    used: u64,
    tick: u64,
    entries: HashMap<BufKey, (u64, u64, bool)>,
    order: BTreeMap<u64, BufKey>,
    in_dram: HashSet<BufKey>,
    hits: u64,
    misses: u64,
}

impl BufferModel {
    pub fn new(capacity: u64, granularity: u64) -> Self {
        Self {
            capacity,
            granularity: granularity.max(1),
            used: 0,
            tick: 0,
            entries: HashMap::new(),
            order: BTreeMap::new(),
            in_dram: HashSet::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn resident_bytes(&self) -> u64 {
        self.used
    }

    pub fn contains(&self, key: &BufKey) -> bool {
        self.entries.contains_key(key)
    }

    fn round(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.granularity) * self.granularity
    }

    /// Touches `key`; `write` marks it dirty.
    pub fn access(&mut self, key: BufKey, bytes: u64, write: bool) -> Access {
        self.tick += 1;
        if let Some((stamp, _, dirty)) = self.entries.get_mut(&key) {
            self.order.remove(stamp);
            *stamp = self.tick;
            *dirty |= write;
            self.order.insert(self.tick, key);
            self.hits += 1;
            return Access { hit: true, ..Default::default() };
        }
        self.misses += 1;
        let mut a = Access::default();
        if self.in_dram.contains(&key) {
            a.read = self.round(bytes);
        }
        if bytes > self.capacity {
            // Streams straight through; its home is DRAM.
            if write {
                a.written += self.round(bytes);
                self.in_dram.insert(key);
            }
            return a;
        }
        while self.used + bytes > self.capacity {
            let (&stamp, &victim) = self.order.iter().next().expect("non-empty when over capacity");
            self.order.remove(&stamp);
            let (_, size, dirty) = self.entries.remove(&victim).unwrap();
            self.used -= size;
            if dirty {
                a.written += self.round(size);
                self.in_dram.insert(victim);
            }
        }
        // A clean refill from DRAM keeps its DRAM copy valid.
        let dirty = write || !self.in_dram.contains(&key);
        self.entries.insert(key, (self.tick, bytes, dirty));
        self.order.insert(self.tick, key);
        self.used += bytes;
        a
    }

    /// Reads data whose home is DRAM: a miss always costs a line fill and the
    /// installed copy is clean.
    pub fn fetch(&mut self, key: BufKey, bytes: u64) -> Access {
        if !self.entries.contains_key(&key) {
            self.in_dram.insert(key);
        }
        self.access(key, bytes, false)
    }

    /// Forgets every entry without write-back; used when all resident data
    /// is dead.
    pub fn clear(&mut self) {
        self.entries.clear();
        self.order.clear();
        self.in_dram.clear();
        self.used = 0;
    }

    /// Drops `key` without writing it back; returns the DRAM read needed if
    /// its only copy had been spilled.
    pub fn consume(&mut self, key: BufKey, bytes: u64) -> u64 {
        if let Some((stamp, size, _)) = self.entries.remove(&key) {
            self.order.remove(&stamp);
            self.used -= size;
            self.in_dram.remove(&key);
            self.hits += 1;
            0
        } else {
            self.misses += 1;
            if self.in_dram.remove(&key) {
                self.round(bytes)
            } else {
                0
            }
        }
    }

    pub fn stats(&self) -> BufferStats {
        let accesses = self.hits + self.misses;
        BufferStats {
            accesses,
            hits: self.hits,
            hit_rate: if accesses == 0 { 0.0 } else { self.hits as f64 / accesses as f64 },
        }
    }
}
