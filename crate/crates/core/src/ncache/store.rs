use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{hash_slot, CacheConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalEdge, EMPTY};
use crate::rng::{mix, uniform};

// Keeps standalone `try_write` draws apart from per-event draws.
const STANDALONE_DOMAIN: u64 = 0x5354_414e_444c_4f4e;

/// Everything a recurrent cell consumes for one cache update:
/// previous state `h`, partner self representation, event time, and link
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub h: Vec<f64>,
    pub partner: Vec<f64>,
    pub t: f64,
    pub feat: Vec<f64>,
}

/// Supplies the hop-0 and hop-1 recurrent updates.
pub trait CacheEncoder: Sync {
    /// New self representation (width `d0`).
    fn self_step(&self, input: &StepInput) -> Vec<f64>;
    /// New hop-1 value (width `F`).
    fn pair_step(&self, input: &StepInput) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotWrite {
    pub slot: usize,
    pub key: NodeId,
    pub value: Vec<f64>,
}

/// Writes one pass of an event produces for its target node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDelta {
    pub node: NodeId,
    pub z0: Vec<f64>,
    pub z0_input: StepInput,
    pub hop1: Option<(SlotWrite, StepInput)>,
    pub hop2: Vec<SlotWrite>,
}

/// Both passes of one event, computed against a read-only snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheDelta {
    pub event_index: u64,
    pub passes: Vec<NodeDelta>,
}

/// Surviving recurrent writes of a committed batch with the inputs that
/// produced them, so the batch can be recomputed under gradient tracking.
#[derive(Debug, Clone, Default)]
pub struct CommitLog {
    pub self_writes: Vec<(NodeId, StepInput)>,
    pub pair_writes: Vec<(NodeId, usize, StepInput)>,
}

impl CommitLog {
    pub fn is_empty(&self) -> bool {
        self.self_writes.is_empty() && self.pair_writes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NCacheStore {
    cfg: CacheConfig,
    num_nodes: usize,
    z0: Vec<f64>,
    keys: [Vec<NodeId>; 2],
    vals: [Vec<f64>; 2],
    /// Events (and standalone writes) consumed so far; keys eviction draws.
    events: u64,
}

/// Byte-exact copy of a store's mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreSnapshot {
    fingerprint: u64,
    num_nodes: usize,
    z0: Vec<f64>,
    keys: [Vec<NodeId>; 2],
    vals: [Vec<f64>; 2],
    events: u64,
}

#[inline]
fn admits(resident: NodeId, key: NodeId, alpha: f64, draw: impl FnOnce() -> f64) -> bool {
    resident == EMPTY || resident == key || draw() < alpha
}

impl NCacheStore {
    pub fn new(cfg: CacheConfig, num_nodes: usize) -> Result<Self> {
        cfg.validate()?;
        let rows = num_nodes + 1;
        let m = [cfg.capacity(1), cfg.capacity(2)];
        Ok(Self {
            cfg,
            num_nodes,
            z0: vec![0.0; rows * cfg.d0],
            keys: [vec![EMPTY; rows * m[0]], vec![EMPTY; rows * m[1]]],
            vals: [vec![0.0; rows * m[0] * cfg.f], vec![0.0; rows * m[1] * cfg.f]],
            events: 0,
        })
    }

    pub(crate) fn from_parts(
        cfg: CacheConfig,
        num_nodes: usize,
        z0: Vec<f64>,
        keys: [Vec<NodeId>; 2],
        vals: [Vec<f64>; 2],
        events: u64,
    ) -> Result<Self> {
        let mut s = Self::new(cfg, num_nodes)?;
        if z0.len() != s.z0.len()
            || keys[0].len() != s.keys[0].len()
            || keys[1].len() != s.keys[1].len()
            || vals[0].len() != s.vals[0].len()
            || vals[1].len() != s.vals[1].len()
        {
            return Err(Error::Checkpoint("array lengths do not match header".into()));
        }
        s.z0 = z0;
        s.keys = keys;
        s.vals = vals;
        s.events = events;
        Ok(s)
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn events_seen(&self) -> u64 {
        self.events
    }

    pub(crate) fn raw_parts(&self) -> (&[f64], &[Vec<NodeId>; 2], &[Vec<f64>; 2]) {
        (&self.z0, &self.keys, &self.vals)
    }

    fn check_node(&self, n: NodeId) -> Result<()> {
        if n == EMPTY || n as usize > self.num_nodes {
            return Err(Error::NodeOutOfRange {
                node: n,
                num_nodes: self.num_nodes,
            });
        }
        Ok(())
    }

    /// Zeroes every representation and empties every dictionary.
    pub fn reset(&mut self) {
        self.z0.fill(0.0);
        for h in 0..2 {
            self.keys[h].fill(EMPTY);
            self.vals[h].fill(0.0);
        }
        self.events = 0;
    }

    pub fn z0(&self, u: NodeId) -> &[f64] {
        let d = self.cfg.d0;
        &self.z0[u as usize * d..(u as usize + 1) * d]
    }

    /// Key array `s_u^(hop)` for hop 1 or 2 (empty slice when the hop is off).
    pub fn keys(&self, u: NodeId, hop: usize) -> &[NodeId] {
        let m = self.cfg.capacity(hop);
        &self.keys[hop - 1][u as usize * m..(u as usize + 1) * m]
    }

    pub fn value(&self, u: NodeId, hop: usize, slot: usize) -> &[f64] {
        let m = self.cfg.capacity(hop);
        let f = self.cfg.f;
        let at = (u as usize * m + slot) * f;
        &self.vals[hop - 1][at..at + f]
    }

    fn slot_for(&self, hop: usize, a: NodeId) -> usize {
        hash_slot(a, self.cfg.capacity(hop), self.cfg.q)
    }

    /// Value stored for key `a` in `u`'s hop-`hop` dictionary, if present.
    pub fn lookup(&self, u: NodeId, hop: usize, a: NodeId) -> Option<&[f64]> {
        assert!(hop == 1 || hop == 2, "lookup is defined for hops 1 and 2");
        if self.cfg.capacity(hop) == 0 || a == EMPTY {
            return None;
        }
        let p = self.slot_for(hop, a);
        (self.keys(u, hop)[p] == a).then(|| self.value(u, hop, p))
    }

    fn write_slot(&mut self, u: NodeId, hop: usize, slot: usize, key: NodeId, value: &[f64]) {
        let m = self.cfg.capacity(hop);
        let f = self.cfg.f;
        debug_assert_eq!(value.len(), f);
        debug_assert!(value.iter().all(|x| x.is_finite()));
        self.keys[hop - 1][u as usize * m + slot] = key;
        let at = (u as usize * m + slot) * f;
        self.vals[hop - 1][at..at + f].copy_from_slice(value);
    }

    /// Single write under the collision policy: empty or same-key slots are
    /// always written, a different resident is evicted with probability
    /// `alpha`. Returns whether the write happened.
    pub fn try_write(&mut self, u: NodeId, hop: usize, a: NodeId, value: &[f64]) -> bool {
        assert!(hop == 1 || hop == 2, "try_write is defined for hops 1 and 2");
        assert_eq!(value.len(), self.cfg.f, "value width must equal F");
        if self.cfg.capacity(hop) == 0 {
            return false;
        }
        let p = self.slot_for(hop, a);
        let resident = self.keys(u, hop)[p];
        let counter = self.events;
        self.events += 1;
        let seed = self.cfg.seed;
        let ok = admits(resident, a, self.cfg.alpha, || {
            uniform(&[seed, STANDALONE_DOMAIN, counter, u as u64, hop as u64, a as u64])
        });
        if ok {
            self.write_slot(u, hop, p, a, value);
        }
        ok
    }

    /// Copies every hop-1 entry of `v` into `u`'s hop-2 dictionary through
    /// [`try_write`](Self::try_write). Returns the number of writes.
    pub fn insert_secondhop(&mut self, u: NodeId, v: NodeId) -> usize {
        if self.cfg.capacity(2) == 0 {
            return 0;
        }
        let entries: Vec<(NodeId, Vec<f64>)> = self
            .keys(v, 1)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != EMPTY)
            .map(|(slot, &w)| (w, self.value(v, 1, slot).to_vec()))
            .collect();
        entries
            .into_iter()
            .filter(|(w, val)| self.try_write(u, 2, *w, val))
            .count()
    }

    fn coin(&self, event: u64, node: NodeId, hop: usize, key: NodeId) -> f64 {
        uniform(&[self.cfg.seed, event, node as u64, hop as u64, key as u64])
    }

    fn pass_delta(
        &self,
        event: u64,
        u: NodeId,
        v: NodeId,
        e: &TemporalEdge,
        enc: &dyn CacheEncoder,
    ) -> NodeDelta {
        let cfg = &self.cfg;
        let zv = self.z0(v).to_vec();
        let z0_input = StepInput {
            h: self.z0(u).to_vec(),
            partner: zv.clone(),
            t: e.t,
            feat: e.feat.clone(),
        };
        let z0 = enc.self_step(&z0_input);

        let mut hop1 = None;
        if cfg.capacity(1) > 0 {
            let p = self.slot_for(1, v);
            let resident = self.keys(u, 1)[p];
            if admits(resident, v, cfg.alpha, || self.coin(event, u, 1, v)) {
                let h = if resident == v {
                    self.value(u, 1, p).to_vec()
                } else {
                    vec![0.0; cfg.f]
                };
                let input = StepInput {
                    h,
                    partner: zv,
                    t: e.t,
                    feat: e.feat.clone(),
                };
                let value = enc.pair_step(&input);
                hop1 = Some((SlotWrite { slot: p, key: v, value }, input));
            }
        }

        let mut hop2 = Vec::new();
        if cfg.capacity(2) > 0 && cfg.capacity(1) > 0 {
            for (slot_w, &w) in self.keys(v, 1).iter().enumerate() {
                if w == EMPTY {
                    continue;
                }
                let p = self.slot_for(2, w);
                let resident = self.keys(u, 2)[p];
                if admits(resident, w, cfg.alpha, || self.coin(event, u, 2, w)) {
                    hop2.push(SlotWrite {
                        slot: p,
                        key: w,
                        value: self.value(v, 1, slot_w).to_vec(),
                    });
                }
            }
        }

        NodeDelta {
            node: u,
            z0,
            z0_input,
            hop1,
            hop2,
        }
    }

    /// Computes the writes of one event against the current state without
    /// mutating it. The `(src, dst)` pass comes first, then `(dst, src)`.
    pub fn compute_delta(
        &self,
        event_index: u64,
        e: &TemporalEdge,
        enc: &dyn CacheEncoder,
    ) -> Result<CacheDelta> {
        self.check_node(e.src)?;
        self.check_node(e.dst)?;
        Ok(CacheDelta {
            event_index,
            passes: vec![
                self.pass_delta(event_index, e.src, e.dst, e, enc),
                self.pass_delta(event_index, e.dst, e.src, e, enc),
            ],
        })
    }

    /// Applies deltas in order; a later write to the same location wins.
    pub fn commit(&mut self, deltas: &[CacheDelta]) -> CommitLog {
        let d0 = self.cfg.d0;
        let mut self_at: HashMap<NodeId, usize> = HashMap::new();
        let mut pair_at: HashMap<(NodeId, usize), usize> = HashMap::new();
        let mut log = CommitLog::default();
        for delta in deltas {
            for pass in &delta.passes {
                let u = pass.node as usize;
                debug_assert!(pass.z0.iter().all(|x| x.is_finite()));
                self.z0[u * d0..(u + 1) * d0].copy_from_slice(&pass.z0);
                let entry = (pass.node, pass.z0_input.clone());
                match self_at.get(&pass.node) {
                    Some(&i) => log.self_writes[i] = entry,
                    None => {
                        self_at.insert(pass.node, log.self_writes.len());
                        log.self_writes.push(entry);
                    }
                }
                if let Some((w, input)) = &pass.hop1 {
                    self.write_slot(pass.node, 1, w.slot, w.key, &w.value);
                    let entry = (pass.node, w.slot, input.clone());
                    match pair_at.get(&(pass.node, w.slot)) {
                        Some(&i) => log.pair_writes[i] = entry,
                        None => {
                            pair_at.insert((pass.node, w.slot), log.pair_writes.len());
                            log.pair_writes.push(entry);
                        }
                    }
                }
                for w in &pass.hop2 {
                    self.write_slot(pass.node, 2, w.slot, w.key, &w.value);
                }
            }
        }
        log
    }

    /// Computes all deltas against the pre-batch state (in parallel), then
    /// commits them in batch order.
    pub fn apply_batch(
        &mut self,
        events: &[TemporalEdge],
        enc: &dyn CacheEncoder,
    ) -> Result<CommitLog> {
        let base = self.events;
        let this = &*self;
        let deltas: Vec<CacheDelta> = if events.len() > 1 {
            events
                .par_iter()
                .enumerate()
                .map(|(i, e)| this.compute_delta(base + i as u64, e, enc))
                .collect::<Result<_>>()?
        } else {
            events
                .iter()
                .enumerate()
                .map(|(i, e)| this.compute_delta(base + i as u64, e, enc))
                .collect::<Result<_>>()?
        };
        let log = self.commit(&deltas);
        self.events += events.len() as u64;
        Ok(log)
    }

    pub fn apply_event(&mut self, e: &TemporalEdge, enc: &dyn CacheEncoder) -> Result<CommitLog> {
        self.apply_batch(std::slice::from_ref(e), enc)
    }

    /// Replays a stream in consecutive batches, discarding commit logs.
    pub fn replay(
        &mut self,
        events: &[TemporalEdge],
        batch_size: usize,
        enc: &dyn CacheEncoder,
    ) -> Result<()> {
        for chunk in events.chunks(batch_size.max(1)) {
            self.apply_batch(chunk, enc)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            fingerprint: self.cfg.fingerprint(),
            num_nodes: self.num_nodes,
            z0: self.z0.clone(),
            keys: self.keys.clone(),
            vals: self.vals.clone(),
            events: self.events,
        }
    }

    pub fn restore(&mut self, snap: &StoreSnapshot) -> Result<()> {
        if snap.fingerprint != self.cfg.fingerprint() || snap.num_nodes != self.num_nodes {
            return Err(Error::Checkpoint(
                "snapshot was taken from a store with a different configuration".into(),
            ));
        }
        self.z0.clone_from(&snap.z0);
        self.keys.clone_from(&snap.keys);
        self.vals.clone_from(&snap.vals);
        self.events = snap.events;
        Ok(())
    }

    /// Number of keys not sitting at their own hash slot. Always zero.
    pub fn slot_violations(&self) -> usize {
        let mut bad = 0;
        for hop in 1..=2 {
            if self.cfg.capacity(hop) == 0 {
                continue;
            }
            for u in 1..=self.num_nodes as NodeId {
                for (p, &a) in self.keys(u, hop).iter().enumerate() {
                    if a != EMPTY && (a as usize > self.num_nodes || self.slot_for(hop, a) != p) {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }

    /// Scalars actually allocated per node (row 0 included in the arrays,
    /// excluded from the count).
    pub fn allocated_scalars_per_node(&self) -> usize {
        let total = self.z0.len()
            + self.keys.iter().map(Vec::len).sum::<usize>()
            + self.vals.iter().map(Vec::len).sum::<usize>();
        total / (self.num_nodes + 1)
    }

    pub fn occupancy(&self, u: NodeId, hop: usize) -> usize {
        self.keys(u, hop).iter().filter(|&&a| a != EMPTY).count()
    }

    /// Text listing of a node's keys per hop.
    pub fn describe_node(&self, u: NodeId) -> String {
        let mut s = format!("node {u}\n");
        for hop in 1..=2 {
            if self.cfg.capacity(hop) == 0 {
                continue;
            }
            let keys: Vec<String> = self
                .keys(u, hop)
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != EMPTY)
                .map(|(p, a)| format!("{a}@{p}"))
                .collect();
            let _ = writeln!(s, "  hop{hop}: {}", keys.join(" "));
        }
        s
    }

    /// Stable digest of the full state, handy for determinism checks.
    pub fn digest(&self) -> u64 {
        let mut acc = vec![self.cfg.fingerprint(), self.events];
        acc.extend(self.z0.iter().map(|x| x.to_bits()));
        for h in 0..2 {
            acc.extend(self.keys[h].iter().map(|&k| k as u64));
            acc.extend(self.vals[h].iter().map(|x| x.to_bits()));
        }
        mix(&acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic encoder: self rep counts events, pair value records the
    /// event time in every slot.
    struct Tagger {
        d0: usize,
        f: usize,
    }

    impl CacheEncoder for Tagger {
        fn self_step(&self, i: &StepInput) -> Vec<f64> {
            (0..self.d0).map(|j| i.h[j] + 1.0 + 0.0 * i.partner[j]).collect()
        }
        fn pair_step(&self, i: &StepInput) -> Vec<f64> {
            (0..self.f).map(|j| i.h[j] + i.t).collect()
        }
    }

    fn cfg(m1: usize, m2: usize, alpha: f64) -> CacheConfig {
        CacheConfig {
            m1,
            m2,
            f: 2,
            d0: 3,
            alpha,
            k: 2,
            seed: 11,
            ..Default::default()
        }
    }

    fn edge(u: NodeId, v: NodeId, t: f64) -> TemporalEdge {
        TemporalEdge::new(u, v, t)
    }

    #[test]
    fn fresh_store_is_empty() {
        let s = NCacheStore::new(cfg(4, 2, 0.9), 10).unwrap();
        for u in 1..=10 {
            for a in 1..=10 {
                assert!(s.lookup(u, 1, a).is_none());
                assert!(s.lookup(u, 2, a).is_none());
            }
        }
    }

    #[test]
    fn write_then_read() {
        let mut s = NCacheStore::new(cfg(4, 2, 0.9), 10).unwrap();
        assert!(s.try_write(3, 1, 7, &[1.5, -2.0]));
        assert_eq!(s.lookup(3, 1, 7), Some(&[1.5, -2.0][..]));
        // same key always overwrites
        assert!(s.try_write(3, 1, 7, &[0.5, 0.5]));
        assert_eq!(s.lookup(3, 1, 7), Some(&[0.5, 0.5][..]));
    }

    #[test]
    fn collision_with_alpha_one_evicts() {
        let mut s = NCacheStore::new(cfg(1, 1, 1.0), 10).unwrap();
        assert!(s.try_write(1, 1, 4, &[1.0, 1.0]));
        assert!(s.try_write(1, 1, 5, &[2.0, 2.0]));
        assert!(s.lookup(1, 1, 4).is_none());
        assert_eq!(s.lookup(1, 1, 5), Some(&[2.0, 2.0][..]));
    }

    #[test]
    fn secondhop_copies_verbatim() {
        let mut s = NCacheStore::new(cfg(8, 8, 1.0), 20).unwrap();
        assert_eq!(s.insert_secondhop(1, 2), 0);
        s.try_write(2, 1, 9, &[0.25, -0.75]);
        assert_eq!(s.insert_secondhop(1, 2), 1);
        let p = hash_slot(9, 8, s.config().q);
        assert_eq!(s.keys(1, 2)[p], 9);
        let got = s.lookup(1, 2, 9).unwrap();
        assert_eq!(got[0].to_bits(), 0.25f64.to_bits());
        assert_eq!(got[1].to_bits(), (-0.75f64).to_bits());
    }

    #[test]
    fn secondhop_distinct_slots() {
        let mut s = NCacheStore::new(cfg(8, 8, 1.0), 40).unwrap();
        let q = s.config().q;
        // ids with pairwise distinct residues under the hop-2 hash
        let mut ids = Vec::new();
        let mut used = std::collections::HashSet::new();
        for a in 3..40 {
            if used.insert(hash_slot(a, 8, q)) && used.insert(1000 + hash_slot(a, 8, q)) {
                ids.push(a);
            }
            if ids.len() == 3 {
                break;
            }
        }
        for &w in &ids {
            s.try_write(2, 1, w, &[w as f64, 0.0]);
        }
        assert_eq!(s.insert_secondhop(1, 2), 3);
    }

    #[test]
    fn first_event_fills_both_hop1_caches() {
        let c = cfg(4, 2, 0.9);
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(c, 5).unwrap();
        s.apply_event(&edge(1, 2, 3.0), &enc).unwrap();
        assert_eq!(s.lookup(1, 1, 2), Some(&[3.0, 3.0][..]));
        assert_eq!(s.lookup(2, 1, 1), Some(&[3.0, 3.0][..]));
        assert_eq!(s.z0(1), &[1.0, 1.0, 1.0]);
        // hop-2 reads pre-event hop-1 state, which was empty
        assert_eq!(s.occupancy(1, 2), 0);
    }

    #[test]
    fn recurrent_update_uses_previous_value() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(4, 2, 0.9), 5).unwrap();
        s.apply_event(&edge(1, 2, 3.0), &enc).unwrap();
        s.apply_event(&edge(1, 2, 4.0), &enc).unwrap();
        assert_eq!(s.lookup(1, 1, 2), Some(&[7.0, 7.0][..]));
    }

    #[test]
    fn hop2_inserts_partner_hop1() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(8, 8, 1.0), 5).unwrap();
        // a=3 meets v=2, then u=1 meets v=2: u's hop-2 gets a
        s.apply_event(&edge(3, 2, 1.0), &enc).unwrap();
        s.apply_event(&edge(1, 2, 2.0), &enc).unwrap();
        let val = s.lookup(1, 2, 3).unwrap().to_vec();
        assert_eq!(val, s.lookup(2, 1, 3).unwrap());
        // v's hop-2 got u's (empty) hop-1 before the event, so nothing
        assert!(s.lookup(2, 2, 3).is_none());
    }

    #[test]
    fn self_loop_matches_sequential_passes() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(4, 4, 0.5), 6).unwrap();
        for (i, (u, v)) in [(1, 2), (2, 3), (1, 3)].iter().enumerate() {
            s.apply_event(&edge(*u, *v, i as f64), &enc).unwrap();
        }
        let mut reference = s.clone();
        s.apply_event(&edge(1, 1, 9.0), &enc).unwrap();

        // reference: compute both passes on the snapshot, apply sequentially
        let idx = reference.events;
        let e = edge(1, 1, 9.0);
        let p1 = reference.pass_delta(idx, 1, 1, &e, &enc);
        let p2 = reference.pass_delta(idx, 1, 1, &e, &enc);
        for p in [p1, p2] {
            reference.z0[3..6].copy_from_slice(&p.z0);
            if let Some((w, _)) = p.hop1 {
                reference.write_slot(1, 1, w.slot, w.key, &w.value);
            }
            for w in p.hop2 {
                reference.write_slot(1, 2, w.slot, w.key, &w.value);
            }
        }
        reference.events += 1;
        assert_eq!(s, reference);
    }

    #[test]
    fn batch_of_disjoint_events_is_order_free() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut a = NCacheStore::new(cfg(4, 4, 0.9), 8).unwrap();
        let mut b = a.clone();
        let e1 = edge(1, 2, 1.0);
        let e2 = edge(3, 4, 1.0);
        a.apply_batch(&[e1.clone(), e2.clone()], &enc).unwrap();
        b.apply_batch(&[e2, e1], &enc).unwrap();
        for u in 1..=8 {
            assert_eq!(a.z0(u), b.z0(u));
            assert_eq!(a.keys(u, 1), b.keys(u, 1));
            assert_eq!(a.keys(u, 2), b.keys(u, 2));
        }
    }

    #[test]
    fn same_slot_conflict_keeps_one_key() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(1, 1, 0.9), 8).unwrap();
        s.apply_batch(&[edge(1, 5, 1.0), edge(1, 6, 1.0)], &enc).unwrap();
        let k = s.keys(1, 1)[0];
        assert!(k == 5 || k == 6);
        assert_eq!(s.slot_violations(), 0);
    }

    #[test]
    fn out_of_range_event() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(4, 2, 0.9), 3).unwrap();
        assert!(matches!(
            s.apply_event(&edge(1, 4, 0.0), &enc),
            Err(Error::NodeOutOfRange { node: 4, .. })
        ));
    }

    #[test]
    fn snapshot_restore() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(4, 2, 0.9), 10).unwrap();
        s.apply_event(&edge(1, 2, 0.0), &enc).unwrap();
        let snap = s.snapshot();
        let before = s.clone();
        for i in 0..100u32 {
            s.apply_event(&edge(1 + i % 10, 1 + (i * 7) % 10, i as f64), &enc).unwrap();
        }
        assert_ne!(s, before);
        s.restore(&snap).unwrap();
        assert_eq!(s, before);

        let mut other = NCacheStore::new(cfg(8, 2, 0.9), 10).unwrap();
        assert!(other.restore(&snap).is_err());
    }

    #[test]
    fn commit_log_keeps_last_writer() {
        let enc = Tagger { d0: 3, f: 2 };
        let mut s = NCacheStore::new(cfg(4, 2, 1.0), 8).unwrap();
        let log = s
            .apply_batch(&[edge(1, 2, 1.0), edge(1, 2, 5.0), edge(3, 4, 2.0)], &enc)
            .unwrap();
        assert_eq!(log.self_writes.len(), 4);
        let (_, inp) = log.self_writes.iter().find(|(n, _)| *n == 1).unwrap();
        assert_eq!(inp.t, 5.0);
        assert_eq!(log.pair_writes.len(), 4);
        let (_, _, inp) = log.pair_writes.iter().find(|(n, _, _)| *n == 2).unwrap();
        assert_eq!(inp.t, 5.0);
    }

    #[test]
    fn describe_lists_keys() {
        let mut s = NCacheStore::new(cfg(4, 2, 1.0), 8).unwrap();
        s.try_write(1, 1, 3, &[0.0, 0.0]);
        let d = s.describe_node(1);
        assert!(d.contains("hop1: 3@"));
    }
}
