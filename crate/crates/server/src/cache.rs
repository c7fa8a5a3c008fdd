//! LRU cache of ranked results keyed by normalized query.
//!
//! Entries remember the snapshot epoch they were computed against; a lookup
//! under a newer epoch drops the entry instead of returning it.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::SystemTime;

use lru::LruCache;
use parking_lot::Mutex;
use qsearch_core::query::RankedResults;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub key: String,
    pub ranked: Arc<RankedResults>,
    pub created_at: SystemTime,
    pub snapshot_epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CacheStats {
    pub size: usize,
    pub capacity: usize,
    pub hits: u64,
    pub misses: u64,
    pub hit_rate: f64,
}

pub struct QueryCache {
    inner: Option<Mutex<LruCache<String, CacheEntry>>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl QueryCache {
    /// A capacity of 0 disables caching; every lookup misses.
    pub fn new(capacity: usize) -> Self {
        QueryCache {
            inner: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))),
            capacity,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, key: &str, epoch: u64) -> Option<Arc<RankedResults>> {
        let found = self.inner.as_ref().and_then(|m| {
            let mut lru = m.lock();
            match lru.get(key) {
                Some(e) if e.snapshot_epoch == epoch => Some(Arc::clone(&e.ranked)),
                Some(_) => {
                    lru.pop(key);
                    None
                }
                None => None,
            }
        });
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn insert(&self, key: String, ranked: Arc<RankedResults>, epoch: u64) {
        if let Some(m) = &self.inner {
            let entry = CacheEntry {
                key: key.clone(),
                ranked,
                created_at: SystemTime::now(),
                snapshot_epoch: epoch,
            };
            m.lock().put(key, entry);
        }
    }

    pub fn clear(&self) {
        if let Some(m) = &self.inner {
            m.lock().clear();
        }
    }

    pub fn len(&self) -> usize {
        self.inner.as_ref().map_or(0, |m| m.lock().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keys from most to least recently used.
    pub fn keys(&self) -> Vec<String> {
        self.inner
            .as_ref()
            .map_or_else(Vec::new, |m| m.lock().iter().map(|(k, _)| k.clone()).collect())
    }

    pub fn stats(&self) -> CacheStats {
        let hits = self.hits.load(Ordering::Relaxed);
        let misses = self.misses.load(Ordering::Relaxed);
        let total = hits + misses;
        CacheStats {
            size: self.len(),
            capacity: self.capacity,
            hits,
            misses,
            hit_rate: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
        }
    }
}
