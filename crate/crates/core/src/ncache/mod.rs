//! Per-node neighborhood caches.
//!
//! Every node `u` owns a self representation (hop 0) and, for hops 1 and 2,
//! a fixed-capacity dictionary from neighbor id to a value vector. A key `a`
//! can only live at slot `hash_slot(a, M_k)`; when another key already holds
//! that slot the incoming write evicts it with probability `alpha`. There is
//! no probing, so a lookup is a single slot read and compare.

mod checkpoint;
mod store;

pub use checkpoint::{load_store, read_store, save_store, write_store, STORE_MAGIC, STORE_VERSION};
pub use store::{
    CacheDelta, CacheEncoder, CommitLog, NCacheStore, NodeDelta, SlotWrite, StepInput,
    StoreSnapshot,
};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::rng::mix;

/// Default multiplicative hash constant (prime).
pub const DEFAULT_Q: u64 = 2_654_435_761;

/// `(q * a) mod m` with a 128-bit intermediate.
#[inline]
pub fn hash_slot(a: NodeId, m: usize, q: u64) -> usize {
    debug_assert!(m >= 1);
    ((q as u128 * a as u128) % m as u128) as usize
}

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q.is_multiple_of(2) {
        return q == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    /// Hop-1 capacity `M1`.
    pub m1: usize,
    /// Hop-2 capacity `M2`; zero disables the hop-2 dictionary.
    pub m2: usize,
    /// Value width for hops >= 1.
    pub f: usize,
    /// Self representation width.
    pub d0: usize,
    /// Probability that a colliding write evicts the resident key.
    pub alpha: f64,
    pub q: u64,
    /// Highest hop kept (0, 1 or 2).
    pub k: usize,
    pub seed: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            m1: 32,
            m2: 16,
            f: 4,
            d0: 72,
            alpha: 0.9,
            q: DEFAULT_Q,
            k: 2,
            seed: 0,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k > 2 {
            return bad(format!("max hop must be 0, 1 or 2 (got {})", self.k));
        }
        if self.k >= 1 && self.m1 == 0 {
            return bad("M1 must be at least 1 when hop 1 is enabled".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1] (got {})", self.alpha));
        }
        if self.d0 == 0 || self.f == 0 {
            return bad("d0 and F must be positive".into());
        }
        if self.q > u32::MAX as u64 + 1 || !is_prime(self.q) {
            return bad(format!("q must be a prime no larger than 2^32 (got {})", self.q));
        }
        if self.q <= self.m1.max(self.m2) as u64 {
            return bad(format!("q ({}) must exceed max(M1, M2)", self.q));
        }
        Ok(())
    }

    /// Capacity of the dictionary at `hop` (1 or 2); zero when that hop is
    /// not kept.
    pub fn capacity(&self, hop: usize) -> usize {
        match hop {
            1 if self.k >= 1 => self.m1,
            2 if self.k >= 2 => self.m2,
            _ => 0,
        }
    }

    /// Scalars stored per node: `d0 + sum_k M_k * (F + 1)` (values plus keys).
    pub fn scalars_per_node(&self) -> usize {
        self.d0 + (1..=2).map(|h| self.capacity(h) * (self.f + 1)).sum::<usize>()
    }

    /// Width of a distance-encoding vector: `2 * (K + 1)`.
    pub fn de_width(&self) -> usize {
        2 * (self.k + 1)
    }

    pub fn fingerprint(&self) -> u64 {
        mix(&[
            self.m1 as u64,
            self.m2 as u64,
            self.f as u64,
            self.d0 as u64,
            self.alpha.to_bits(),
            self.q,
            self.k as u64,
            self.seed,
        ])
    }
}
