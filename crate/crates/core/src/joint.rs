//! Joint neighborhood features for a queried link `(u, v)`.
//!
//! Both endpoints' caches (hop 0 contributes the node itself) are flattened
//! into one key array, empty slots dropped, keys deduplicated, and the values
//! of each distinct key summed. Each distinct key also gets a bit vector
//! recording which `(endpoint, hop)` caches hold it.

use rayon::prelude::*;

use crate::graph::{NodeId, EMPTY};
use crate::ncache::NCacheStore;

/// Maps a self representation (width `d0`) into value space (width `F`).
pub trait SelfProjection: Sync {
    fn project(&self, z0: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> SelfProjection for F {
    fn project(&self, z0: &[f64]) -> Vec<f64> {
        self(z0)
    }
}

/// Membership bits, `side * (K + 1) + hop`, side 0 for `u` and 1 for `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeVector {
    pub bits: u8,
    pub width: u8,
}

impl DeVector {
    pub fn new(k: usize) -> Self {
        Self {
            bits: 0,
            width: (2 * (k + 1)) as u8,
        }
    }

    pub fn bit_index(&self, side: usize, hop: usize) -> usize {
        side * (self.width as usize / 2) + hop
    }

    pub fn set(&mut self, side: usize, hop: usize) {
        self.bits |= 1 << self.bit_index(side, hop);
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.width as usize)
            .map(|i| if self.get(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// `"010|010"` style rendering.
    pub fn render(&self) -> String {
        let half = self.width as usize / 2;
        let side = |s: usize| -> String {
            (0..half)
                .map(|h| if self.get(s * half + h) { '1' } else { '0' })
                .collect()
        };
        format!("{}|{}", side(0), side(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFeature {
    pub node: NodeId,
    pub de: DeVector,
    pub q: Vec<f64>,
}

/// One non-empty entry of the concatenated key array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub key: NodeId,
    /// Endpoint whose cache holds the entry.
    pub owner: NodeId,
    pub side: u8,
    pub hop: u8,
    /// Slot within the owner's dictionary (0 for hop 0).
    pub slot: u32,
}

/// Features of one link plus the entries they were pooled from.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSet {
    pub features: Vec<JointFeature>,
    pub entries: Vec<Entry>,
    /// Feature index of every entry.
    pub phi: Vec<usize>,
}

fn collect_entries(store: &NCacheStore, u: NodeId, v: NodeId, out: &mut Vec<Entry>) {
    let k = store.config().k;
    for (side, w) in [(0u8, u), (1u8, v)] {
        out.push(Entry {
            key: w,
            owner: w,
            side,
            hop: 0,
            slot: 0,
        });
        for hop in 1..=k {
            if store.config().capacity(hop) == 0 {
                continue;
            }
            for (slot, &a) in store.keys(w, hop).iter().enumerate() {
                if a != EMPTY {
                    out.push(Entry {
                        key: a,
                        owner: w,
                        side,
                        hop: hop as u8,
                        slot: slot as u32,
                    });
                }
            }
        }
    }
}

fn entry_value<'a>(
    store: &'a NCacheStore,
    e: &Entry,
    hop0: &'a [Vec<f64>; 2],
) -> &'a [f64] {
    if e.hop == 0 {
        &hop0[e.side as usize]
    } else {
        store.value(e.owner, e.hop as usize, e.slot as usize)
    }
}

/// Deduplicates `entries` by key. Returns the inverse index and the first
/// entry position of every unique key, in first-occurrence order.
fn unique_first_occurrence(entries: &[Entry]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_unstable_by_key(|&i| (entries[i].key, i));
    // group id per sorted run, then renumber groups by first position
    let mut firsts = Vec::new();
    let mut group_of = vec![0usize; entries.len()];
    for (j, &i) in order.iter().enumerate() {
        if j == 0 || entries[order[j - 1]].key != entries[i].key {
            firsts.push(i);
        }
        group_of[i] = firsts.len() - 1;
    }
    let mut rank: Vec<usize> = (0..firsts.len()).collect();
    rank.sort_unstable_by_key(|&g| firsts[g]);
    let mut renumber = vec![0usize; firsts.len()];
    for (new, &g) in rank.iter().enumerate() {
        renumber[g] = new;
    }
    let phi = group_of.iter().map(|&g| renumber[g]).collect();
    let first = rank.iter().map(|&g| firsts[g]).collect();
    (phi, first)
}

fn assemble(
    store: &NCacheStore,
    u: NodeId,
    v: NodeId,
    entries: Vec<Entry>,
    proj: &dyn SelfProjection,
) -> JointSet {
    let cfg = store.config();
    let hop0 = [proj.project(store.z0(u)), proj.project(store.z0(v))];
    let (phi, first) = unique_first_occurrence(&entries);
    let mut features: Vec<JointFeature> = first
        .iter()
        .map(|&i| JointFeature {
            node: entries[i].key,
            de: DeVector::new(cfg.k),
            q: vec![0.0; cfg.f],
        })
        .collect();
    for (e, &g) in entries.iter().zip(&phi) {
        let f = &mut features[g];
        f.de.set(e.side as usize, e.hop as usize);
        for (q, x) in f.q.iter_mut().zip(entry_value(store, e, &hop0)) {
            *q += x;
        }
    }
    JointSet {
        features,
        entries,
        phi,
    }
}

/// Joint features of `(u, v)` in first-occurrence order.
pub fn build_joint(store: &NCacheStore, u: NodeId, v: NodeId, proj: &dyn SelfProjection) -> JointSet {
    let mut entries = Vec::new();
    collect_entries(store, u, v, &mut entries);
    assemble(store, u, v, entries, proj)
}

/// Direct double loop: for every distinct key, scan every cache.
pub fn naive_joint(
    store: &NCacheStore,
    u: NodeId,
    v: NodeId,
    proj: &dyn SelfProjection,
) -> Vec<JointFeature> {
    let cfg = store.config();
    let hop0 = [proj.project(store.z0(u)), proj.project(store.z0(v))];
    let mut order: Vec<NodeId> = Vec::new();
    let push = |a: NodeId, order: &mut Vec<NodeId>| {
        if !order.contains(&a) {
            order.push(a);
        }
    };
    for w in [u, v] {
        push(w, &mut order);
        for hop in 1..=cfg.k {
            if cfg.capacity(hop) > 0 {
                for &a in store.keys(w, hop) {
                    if a != EMPTY {
                        push(a, &mut order);
                    }
                }
            }
        }
    }

    order
        .into_iter()
        .map(|a| {
            let mut de = DeVector::new(cfg.k);
            let mut q = vec![0.0; cfg.f];
            for (side, w) in [(0usize, u), (1usize, v)] {
                if a == w {
                    de.set(side, 0);
                    for (x, y) in q.iter_mut().zip(&hop0[side]) {
                        *x += y;
                    }
                }
                for hop in 1..=cfg.k {
                    if cfg.capacity(hop) == 0 {
                        continue;
                    }
                    for (slot, &b) in store.keys(w, hop).iter().enumerate() {
                        if b == a {
                            de.set(side, hop);
                            for (x, y) in q.iter_mut().zip(store.value(w, hop, slot)) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            JointFeature { node: a, de, q }
        })
        .collect()
}

/// Joint sets of many links, packed flat. Link `i` owns
/// `entries[entry_offsets[i]..entry_offsets[i + 1]]` and likewise for
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBatch {
    pub entry_offsets: Vec<usize>,
    pub feature_offsets: Vec<usize>,
    pub entries: Vec<Entry>,
    pub phi: Vec<usize>,
    pub features: Vec<JointFeature>,
}

impl JointBatch {
    pub fn len(&self) -> usize {
        self.feature_offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features_of(&self, i: usize) -> &[JointFeature] {
        &self.features[self.feature_offsets[i]..self.feature_offsets[i + 1]]
    }

    pub fn link(&self, i: usize) -> JointSet {
        let r = self.entry_offsets[i]..self.entry_offsets[i + 1];
        JointSet {
            features: self.features_of(i).to_vec(),
            entries: self.entries[r.clone()].to_vec(),
            phi: self.phi[r].to_vec(),
        }
    }
}

pub fn build_joint_batch(
    store: &NCacheStore,
    links: &[(NodeId, NodeId)],
    proj: &dyn SelfProjection,
) -> JointBatch {
    let mut entries = Vec::new();
    let mut entry_offsets = Vec::with_capacity(links.len() + 1);
    entry_offsets.push(0);
    for &(u, v) in links {
        collect_entries(store, u, v, &mut entries);
        entry_offsets.push(entries.len());
    }
    let sets: Vec<JointSet> = links
        .par_iter()
        .enumerate()
        .map(|(i, &(u, v))| {
            let seg = entries[entry_offsets[i]..entry_offsets[i + 1]].to_vec();
            assemble(store, u, v, seg, proj)
        })
        .collect();
    let mut phi = Vec::with_capacity(entries.len());
    let mut features = Vec::new();
    let mut feature_offsets = vec![0];
    for s in sets {
        phi.extend(s.phi);
        features.extend(s.features);
        feature_offsets.push(features.len());
    }
    JointBatch {
        entry_offsets,
        feature_offsets,
        entries,
        phi,
        features,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncache::CacheConfig;

    fn ident(z: &[f64]) -> Vec<f64> {
        z.to_vec()
    }

    fn store(m1: usize, m2: usize) -> NCacheStore {
        let cfg = CacheConfig {
            m1,
            m2,
            f: 2,
            d0: 2,
            alpha: 1.0,
            seed: 1,
            ..Default::default()
        };
        NCacheStore::new(cfg, 10).unwrap()
    }

    #[test]
    fn fresh_store_gives_two_hop0_features() {
        let s = store(4, 2);
        let j = build_joint(&s, 1, 2, &ident);
        assert_eq!(j.features.len(), 2);
        assert_eq!(j.features[0].node, 1);
        assert_eq!(j.features[0].de.render(), "100|000");
        assert_eq!(j.features[1].de.render(), "000|100");
        assert_eq!(j.features[0].q, vec![0.0, 0.0]);

        let j = build_joint(&s, 3, 3, &ident);
        assert_eq!(j.features.len(), 1);
        assert_eq!(j.features[0].de.render(), "100|100");
    }

    #[test]
    fn shared_neighbor_sums_values() {
        let mut s = store(4, 2);
        s.try_write(1, 1, 5, &[1.0, 2.0]);
        s.try_write(2, 1, 5, &[10.0, 20.0]);
        let j = build_joint(&s, 1, 2, &ident);
        let a = j.features.iter().find(|f| f.node == 5).unwrap();
        assert_eq!(a.q, vec![11.0, 22.0]);
        assert_eq!(a.de.render(), "010|010");
    }

    #[test]
    fn same_node_in_two_hops() {
        let mut s = store(4, 4);
        s.try_write(1, 1, 5, &[1.0, 0.0]);
        s.try_write(1, 2, 5, &[0.0, 3.0]);
        let j = build_joint(&s, 1, 2, &ident);
        let a = j.features.iter().find(|f| f.node == 5).unwrap();
        assert_eq!(a.q, vec![1.0, 3.0]);
        assert_eq!(a.de.render(), "011|000");
    }

    #[test]
    fn de_width_follows_k() {
        let cfg = CacheConfig { m1: 4, m2: 0, f: 2, d0: 2, k: 1, ..Default::default() };
        let s = NCacheStore::new(cfg, 4).unwrap();
        let j = build_joint(&s, 1, 2, &ident);
        assert_eq!(j.features[0].de.width, 4);
        let cfg = CacheConfig { k: 0, ..cfg };
        let s = NCacheStore::new(cfg, 4).unwrap();
        assert_eq!(build_joint(&s, 1, 2, &ident).features[0].de.width, 2);
    }

    #[test]
    fn unique_order_and_inverse() {
        let mk = |key| Entry { key, owner: 1, side: 0, hop: 1, slot: 0 };
        let es: Vec<Entry> = [7, 3, 7, 9, 3].into_iter().map(mk).collect();
        let (phi, first) = unique_first_occurrence(&es);
        assert_eq!(first, vec![0, 1, 3]);
        assert_eq!(phi, vec![0, 1, 0, 2, 1]);
    }

    #[test]
    fn naive_agrees_on_small_case() {
        let mut s = store(4, 4);
        s.try_write(1, 1, 5, &[1.0, 0.5]);
        s.try_write(1, 2, 2, &[0.25, 0.0]);
        s.try_write(2, 1, 6, &[2.0, 0.0]);
        s.try_write(2, 2, 1, &[3.0, 1.0]);
        let j = build_joint(&s, 1, 2, &ident);
        assert_eq!(j.features, naive_joint(&s, 1, 2, &ident));
    }

    #[test]
    fn batch_matches_single() {
        let mut s = store(4, 2);
        s.try_write(1, 1, 5, &[1.0, 2.0]);
        s.try_write(3, 1, 1, &[1.0, 2.0]);
        let links = [(1, 2), (3, 1), (1, 2)];
        let b = build_joint_batch(&s, &links, &ident);
        assert_eq!(b.len(), 3);
        for (i, &(u, v)) in links.iter().enumerate() {
            assert_eq!(b.link(i), build_joint(&s, u, v, &ident));
        }
        assert_eq!(b.features_of(0), b.features_of(2));
    }
}
